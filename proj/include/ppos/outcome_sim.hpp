#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ppos/dataset.hpp"
#include "ppos/errors.hpp"
#include "ppos/hazard_models.hpp"
#include "ppos/rng.hpp"

namespace ppos {

// Future-enrollment model: the fixed arm receives exactly n_new_fixed_arm
// subjects; the other arm count is NegativeBinomial(n_new_fixed_arm,
// randomization_prob), i.e. failures before the last fixed-arm success.
struct EnrollmentSpec {
  int n_new_fixed_arm = 0;
  int fixed_arm = 1;
  double randomization_prob = 0.5;

  struct BinaryCovariateModel {
    std::string name;
    BetaPrior prior{1.0, 1.0};
  };
  std::vector<BinaryCovariateModel> covariate_models;
};

struct CensoringRule {
  enum class Mode { none, scalar, per_subject, calendar };
  Mode mode = Mode::none;
  double horizon = 0.0;  // scalar horizon, or calendar horizon from origin
  std::unordered_map<std::string, double> horizons;

  CompetingRiskDataset apply(const CompetingRiskDataset& ds) const {
    switch (mode) {
      case Mode::none:
        return ds;
      case Mode::scalar:
        return administrative_censor(ds, horizon);
      case Mode::per_subject:
        return administrative_censor(ds, horizons);
      case Mode::calendar: {
        // subject-specific horizon = calendar horizon minus entry offset
        std::unordered_map<std::string, double> h;
        h.reserve(ds.records.size());
        for (const auto& r : ds.records) {
          const double offset = r.origin_offset.value_or(0.0);
          h[r.subject_id] = horizon - offset;
        }
        return administrative_censor(ds, h);
      }
    }
    throw ConfigError("unknown censoring mode");
  }
};

// Smallest t with total cumulative hazard equal to `target`. Piecewise
// constant pairs invert exactly; otherwise bracket by doubling and bisect to
// 1e-10 in cumulative-hazard space.
inline double invert_cum_hazard(const BoundHazardPair& pair, double target) {
  if (!(target > 0.0)) throw NumericError("inversion target must be positive");

  const auto* p1 = std::get_if<PchCsModel>(pair.cause1);
  const auto* p2 = std::get_if<PchCsModel>(pair.cause2);
  if (p1 && p2) {
    std::vector<double> cuts{0.0};
    for (double q : p1->internal_knots) cuts.push_back(q);
    for (double q : p2->internal_knots) cuts.push_back(q);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const double s1 = detail::dot(p1->covariate_coeffs, pair.z1);
    const double s2 = detail::dot(p2->covariate_coeffs, pair.z2);
    double cum = 0.0;
    for (std::size_t k = 0; k < cuts.size(); ++k) {
      const double a = cuts[k];
      const double b = k + 1 < cuts.size() ? cuts[k + 1] : kInf;
      const double probe = b == kInf ? a + 1.0 : 0.5 * (a + b);
      const double rate =
          std::exp(p1->level_log_hazards[detail::pch_interval(
                       p1->internal_knots, probe)] +
                   s1) +
          std::exp(p2->level_log_hazards[detail::pch_interval(
                       p2->internal_knots, probe)] +
                   s2);
      const double seg = b == kInf ? kInf : rate * (b - a);
      if (target <= cum + seg) {
        if (rate <= 0.0) {
          throw NumericError("immortal tail: cumulative hazard is bounded below target");
        }
        return a + (target - cum) / rate;
      }
      cum += seg;
    }
    throw NumericError("immortal tail: cumulative hazard is bounded below target");
  }

  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (pair.total_cum_hazard(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 1100 || hi > 1e300) {
      throw NumericError("immortal tail: cumulative hazard is bounded below target");
    }
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 2000; ++it) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double v = pair.total_cum_hazard(mid);
    if (std::abs(v - target) <= 1e-10) return mid;
    (v < target ? lo : hi) = mid;
  }
  return mid;
}

// Event time conditional on survival beyond `truncate_after` (0 for an
// unconditional draw): solves H(t) = H(c) + E with E ~ Exponential(1).
inline double draw_event_time(const BoundHazardPair& pair, double truncate_after,
                              Philox& rng) {
  if (!(truncate_after >= 0.0)) {
    throw NumericError("truncation time must be nonnegative");
  }
  const double base =
      truncate_after > 0.0 ? pair.total_cum_hazard(truncate_after) : 0.0;
  const double target = base + rng.exponential();
  return invert_cum_hazard(pair, target);
}

inline int draw_event_type(const BoundHazardPair& pair, double t, Philox& rng) {
  return rng.uniform01() < cause_probability(pair, t) ? 1 : 2;
}

// Covariate rows for future enrollees: the fixed arm receives its planned
// count, the other arm count is drawn, binary covariates are Bernoulli(eta).
// Outcome fields are placeholders until prediction fills them in.
inline std::vector<SubjectRecord> simulate_enrollment(
    const EnrollmentSpec& spec, const std::vector<double>& eta,
    const DatasetSchema& schema, Philox& rng,
    const std::string& id_prefix = "new_") {
  if (eta.size() != spec.covariate_models.size()) {
    throw ConfigError("enrollment: eta draw count does not match covariate models");
  }
  if (!(spec.randomization_prob > 0.0 && spec.randomization_prob <= 1.0)) {
    throw ConfigError("enrollment: randomization_prob must be in (0,1]");
  }

  std::vector<int> model_idx(spec.covariate_models.size());
  for (std::size_t j = 0; j < spec.covariate_models.size(); ++j) {
    const int idx = schema.covariate_index(spec.covariate_models[j].name);
    if (idx < 0) {
      throw ConfigError("enrollment covariate '" +
                        spec.covariate_models[j].name + "' not in schema");
    }
    model_idx[j] = idx;
  }

  const long n_other = spec.randomization_prob >= 1.0
                           ? 0
                           : rng.negative_binomial(spec.n_new_fixed_arm,
                                                   spec.randomization_prob);
  std::vector<SubjectRecord> rows;
  rows.reserve(static_cast<std::size_t>(spec.n_new_fixed_arm) +
               static_cast<std::size_t>(n_other));
  long counter = 0;
  const auto add_row = [&](int arm) {
    SubjectRecord r;
    r.subject_id = id_prefix + std::to_string(++counter);
    r.arm = arm;
    r.covariates.assign(schema.covariate_names.size(), 0.0);
    for (std::size_t j = 0; j < model_idx.size(); ++j) {
      r.covariates[static_cast<std::size_t>(model_idx[j])] =
          static_cast<double>(rng.bernoulli(eta[j]));
    }
    if (schema.has_origin_offset) r.origin_offset = 0.0;
    rows.push_back(std::move(r));
  };
  for (int i = 0; i < spec.n_new_fixed_arm; ++i) add_row(spec.fixed_arm);
  for (long i = 0; i < n_other; ++i) add_row(1 - spec.fixed_arm);
  return rows;
}

// One predicted completed dataset: observed interim records unchanged,
// censored records extended conditionally on their censoring time, future
// enrollees simulated unconditionally, censoring applied to the stack.
inline CompetingRiskDataset predict_final_dataset(
    const CompetingRiskDataset& d_obs, const CompetingRiskDataset& d_cens,
    const CauseModelSet& models_at_draw,
    const std::optional<EnrollmentSpec>& enrollment,
    const std::vector<double>& eta, const CensoringRule& censoring,
    Philox& rng) {
  CompetingRiskDataset out;
  out.schema = d_obs.schema;
  out.time_unit = d_obs.time_unit;
  out.records = d_obs.records;

  for (const auto& r : d_cens.records) {
    const auto pair = bind_pair(models_at_draw, r);
    SubjectRecord updated = r;
    updated.time = draw_event_time(pair, r.time, rng);
    updated.event = draw_event_type(pair, updated.time, rng);
    out.records.push_back(std::move(updated));
  }

  if (enrollment) {
    auto rows = simulate_enrollment(*enrollment, eta, out.schema, rng);
    for (auto& r : rows) {
      const auto pair = bind_pair(models_at_draw, r);
      r.time = draw_event_time(pair, 0.0, rng);
      r.event = draw_event_type(pair, r.time, rng);
      out.records.push_back(std::move(r));
    }
  }

  return censoring.apply(out);
}

}  // namespace ppos
