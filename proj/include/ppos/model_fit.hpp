#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ppos/dataset.hpp"
#include "ppos/errors.hpp"
#include "ppos/hazard_models.hpp"
#include "ppos/math.hpp"
#include "ppos/mcmc.hpp"

namespace ppos {

// Specification of one cause-specific model fit: which subjects enter
// (arm = -1 pools both arms), which family, and the priors.
struct StratumFitSpec {
  int cause = 1;
  int arm = -1;
  bool weibull = true;
  std::vector<double> pch_knots;
  CovariateBinding binding;
  ModelPriors priors;

  std::size_t n_levels() const { return pch_knots.size() + 1; }
  bool pch_hierarchical() const { return !weibull && priors.levels_rw.has_value(); }

  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    if (weibull) {
      names.push_back("intercept");
      for (const auto& c : binding.names) names.push_back("b_" + c);
      names.push_back("shape");
    } else {
      for (std::size_t l = 1; l <= n_levels(); ++l) {
        names.push_back("level_" + std::to_string(l));
      }
      for (const auto& c : binding.names) names.push_back("b_" + c);
      if (pch_hierarchical()) names.push_back("tau");
    }
    return names;
  }
};

namespace detail {

// Sufficient summaries for fast repeated likelihood evaluation. Subjects
// with identical covariate rows are pooled for the exposure terms.
struct WeibullFitData {
  std::size_t n_events = 0;
  double sum_log_t_events = 0.0;
  std::vector<double> z_event_sum;             // per coefficient
  std::vector<double> log_times;               // all subjects with y > 0
  std::vector<std::vector<double>> z_rows;     // aligned with log_times

  double loglik(std::span<const double> params, std::size_t p) const {
    const double intercept = params[0];
    const std::span<const double> coeffs{params.data() + 1, p};
    const double shape = std::exp(params[1 + p]);
    double ll = static_cast<double>(n_events) * std::log(shape) +
                (shape - 1.0) * sum_log_t_events +
                static_cast<double>(n_events) * intercept;
    for (std::size_t j = 0; j < p; ++j) ll += coeffs[j] * z_event_sum[j];
    for (std::size_t s = 0; s < log_times.size(); ++s) {
      double lin = intercept + shape * log_times[s];
      for (std::size_t j = 0; j < p; ++j) lin += coeffs[j] * z_rows[s][j];
      ll -= std::exp(lin);
    }
    return ll;
  }
};

struct PchFitData {
  std::vector<double> event_counts;         // per interval
  std::vector<double> z_event_sum;          // per coefficient
  std::vector<std::vector<double>> group_z; // distinct covariate rows
  std::vector<std::vector<double>> group_exposure;  // per group, per interval

  double loglik(std::span<const double> params, std::size_t n_levels,
                std::size_t p) const {
    const std::span<const double> levels{params.data(), n_levels};
    const std::span<const double> coeffs{params.data() + n_levels, p};
    double ll = 0.0;
    for (std::size_t l = 0; l < n_levels; ++l) ll += levels[l] * event_counts[l];
    for (std::size_t j = 0; j < p; ++j) ll += coeffs[j] * z_event_sum[j];
    std::vector<double> exp_exposure(n_levels, 0.0);
    for (std::size_t g = 0; g < group_z.size(); ++g) {
      double lin = 0.0;
      for (std::size_t j = 0; j < p; ++j) lin += coeffs[j] * group_z[g][j];
      const double w = std::exp(lin);
      for (std::size_t l = 0; l < n_levels; ++l) {
        exp_exposure[l] += w * group_exposure[g][l];
      }
    }
    for (std::size_t l = 0; l < n_levels; ++l) {
      ll -= std::exp(levels[l]) * exp_exposure[l];
    }
    return ll;
  }
};

inline std::vector<double> interval_exposure(const std::vector<double>& knots,
                                             double y) {
  std::vector<double> e(knots.size() + 1, 0.0);
  double lo = 0.0;
  for (std::size_t l = 0; l <= knots.size(); ++l) {
    const double hi = l < knots.size() ? knots[l] : kInf;
    const double len = std::min(y, hi) - lo;
    if (len <= 0.0) break;
    e[l] = len;
    lo = hi;
  }
  return e;
}

}  // namespace detail

// Posterior fit of one cause-specific hazard model. Sampling happens on the
// unconstrained scale (log shape, log tau); the returned draws are natural.
struct FittedStratum {
  StratumFitSpec spec;
  PosteriorDraws draws;

  StratumModel materialize(std::size_t row) const {
    StratumModel sm;
    sm.cause = spec.cause;
    sm.arm = spec.arm;
    const std::size_t p = spec.binding.names.size();
    if (spec.weibull) {
      WeibullCsModel m;
      m.intercept = draws.at(row, 0);
      for (std::size_t j = 0; j < p; ++j) m.covariate_coeffs.push_back(draws.at(row, 1 + j));
      m.shape = draws.at(row, 1 + p);
      sm.model = m;
    } else {
      PchCsModel m;
      m.internal_knots = spec.pch_knots;
      const std::size_t nl = spec.n_levels();
      for (std::size_t l = 0; l < nl; ++l) m.level_log_hazards.push_back(draws.at(row, l));
      for (std::size_t j = 0; j < p; ++j) m.covariate_coeffs.push_back(draws.at(row, nl + j));
      sm.model = m;
      if (spec.pch_hierarchical()) sm.rw_tau = draws.at(row, nl + p);
    }
    return sm;
  }
};

inline FittedStratum fit_stratum(const CompetingRiskDataset& data,
                                 StratumFitSpec spec, SamplerConfig cfg) {
  spec.binding.resolve(data.schema);
  const std::size_t p = spec.binding.names.size();
  if (spec.priors.coeffs.size() < p) {
    throw ConfigError("missing coefficient priors for stratum fit");
  }

  // Assemble per-subject inputs: event indicator for this cause; records of
  // the other cause count as censored exposure.
  std::vector<double> times, z;
  std::vector<std::vector<double>> z_rows;
  std::vector<int> is_event;
  for (const auto& r : data.records) {
    if (spec.arm >= 0 && r.arm != spec.arm) continue;
    if (r.time <= 0.0) {
      if (r.event == spec.cause) {
        throw DataError("subject '" + r.subject_id + "': event at time zero");
      }
      continue;  // zero exposure
    }
    times.push_back(r.time);
    z_rows.push_back(spec.binding.row(r));
    is_event.push_back(r.event == spec.cause ? 1 : 0);
  }

  std::vector<double> init;
  LogDensity target;
  double total_exposure = 0.0;
  std::size_t n_events = 0;
  for (std::size_t s = 0; s < times.size(); ++s) {
    total_exposure += times[s];
    n_events += static_cast<std::size_t>(is_event[s]);
  }

  if (spec.weibull) {
    auto fd = std::make_shared<detail::WeibullFitData>();
    fd->z_event_sum.assign(p, 0.0);
    for (std::size_t s = 0; s < times.size(); ++s) {
      fd->log_times.push_back(std::log(times[s]));
      fd->z_rows.push_back(z_rows[s]);
      if (is_event[s]) {
        ++fd->n_events;
        fd->sum_log_t_events += std::log(times[s]);
        for (std::size_t j = 0; j < p; ++j) fd->z_event_sum[j] += z_rows[s][j];
      }
    }
    const ModelPriors priors = spec.priors;
    target = [fd, priors, p](std::span<const double> params) {
      const double shape = std::exp(params[1 + p]);
      double lp = fd->loglik(params, p);
      lp += log_prior_density(priors.intercept, params[0]);
      for (std::size_t j = 0; j < p; ++j) {
        lp += log_prior_density(priors.coeffs[j], params[1 + j]);
      }
      lp += log_prior_density(priors.shape, shape) + params[1 + p];  // Jacobian
      return lp;
    };
    init.assign(p + 2, 0.0);
    init[0] = std::log((static_cast<double>(n_events) + 0.5) /
                       (total_exposure + 0.5));
  } else {
    const std::size_t nl = spec.n_levels();
    if (!spec.priors.levels_rw && spec.priors.level_priors.size() < nl) {
      throw ConfigError("missing level priors for PCH stratum fit");
    }
    auto fd = std::make_shared<detail::PchFitData>();
    fd->event_counts.assign(nl, 0.0);
    fd->z_event_sum.assign(p, 0.0);
    std::map<std::vector<double>, std::size_t> group_of;
    for (std::size_t s = 0; s < times.size(); ++s) {
      const auto exposure = detail::interval_exposure(spec.pch_knots, times[s]);
      auto [it, inserted] = group_of.try_emplace(z_rows[s], fd->group_z.size());
      if (inserted) {
        fd->group_z.push_back(z_rows[s]);
        fd->group_exposure.emplace_back(nl, 0.0);
      }
      auto& ge = fd->group_exposure[it->second];
      for (std::size_t l = 0; l < nl; ++l) ge[l] += exposure[l];
      if (is_event[s]) {
        fd->event_counts[detail::pch_interval(spec.pch_knots, times[s])] += 1.0;
        for (std::size_t j = 0; j < p; ++j) fd->z_event_sum[j] += z_rows[s][j];
      }
    }
    const ModelPriors priors = spec.priors;
    const bool hier = spec.pch_hierarchical();
    target = [fd, priors, nl, p, hier](std::span<const double> params) {
      double lp = fd->loglik(params, nl, p);
      if (hier) {
        const double tau = std::exp(params[nl + p]);
        lp += random_walk1_log_density({params.data(), nl}, *priors.levels_rw,
                                       tau);
        lp += params[nl + p];  // Jacobian
      } else {
        for (std::size_t l = 0; l < nl; ++l) {
          lp += log_prior_density(priors.level_priors[l], params[l]);
        }
      }
      for (std::size_t j = 0; j < p; ++j) {
        lp += log_prior_density(priors.coeffs[j], params[nl + j]);
      }
      return lp;
    };
    init.assign(nl + p + (hier ? 1 : 0), 0.0);
    std::vector<double> total_e(nl, 0.0);
    for (const auto& ge : fd->group_exposure) {
      for (std::size_t l = 0; l < nl; ++l) total_e[l] += ge[l];
    }
    for (std::size_t l = 0; l < nl; ++l) {
      init[l] = std::log((fd->event_counts[l] + 0.5) / (total_e[l] + 0.5));
    }
    if (hier) init[nl + p] = std::log(0.5);
  }

  auto draws = sample_posterior(target, init, cfg, spec.param_names());

  // Back-transform the log-scale columns to the natural scale.
  const std::size_t d = draws.n_params();
  std::vector<std::size_t> log_cols;
  if (spec.weibull) {
    log_cols.push_back(d - 1);  // shape
  } else if (spec.pch_hierarchical()) {
    log_cols.push_back(d - 1);  // tau
  }
  for (std::size_t col : log_cols) {
    for (std::size_t row = 0; row < draws.n_total(); ++row) {
      auto& v = draws.values[row * d + col];
      v = std::exp(v);
    }
  }
  draws.diagnostics = compute_diagnostics(draws);

  return {std::move(spec), std::move(draws)};
}

}  // namespace ppos
