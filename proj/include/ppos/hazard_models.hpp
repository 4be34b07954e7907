#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ppos/dataset.hpp"
#include "ppos/errors.hpp"
#include "ppos/math.hpp"

namespace ppos {

// Weibull cause-specific hazard u(z) * shape * t^(shape-1) with
// log u(z) = intercept + coeffs'z.
struct WeibullCsModel {
  double intercept = 0.0;
  std::vector<double> covariate_coeffs;
  double shape = 1.0;
};

// Piecewise-constant cause-specific log-hazard over intervals
// (q_{l-1}, q_l], boundary knots 0 and +inf implicit:
// log lambda(t|z) = level[l(t)] + coeffs'z.
struct PchCsModel {
  std::vector<double> internal_knots;     // strictly increasing, positive
  std::vector<double> level_log_hazards;  // size = internal_knots.size() + 1
  std::vector<double> covariate_coeffs;
};

using CsModel = std::variant<WeibullCsModel, PchCsModel>;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Interval containing t under left-open right-closed knot convention.
inline std::size_t pch_interval(const std::vector<double>& knots, double t) {
  std::size_t l = 0;
  while (l < knots.size() && t > knots[l]) ++l;
  return l;
}

}  // namespace detail

inline double log_hazard(const WeibullCsModel& m, double t,
                         std::span<const double> z) {
  if (!(t > 0.0)) throw NumericError("log_hazard requires t > 0");
  const double log_u = m.intercept + detail::dot(m.covariate_coeffs, z);
  return log_u + std::log(m.shape) + (m.shape - 1.0) * std::log(t);
}

inline double log_hazard(const PchCsModel& m, double t,
                         std::span<const double> z) {
  if (!(t > 0.0)) throw NumericError("log_hazard requires t > 0");
  const std::size_t l = detail::pch_interval(m.internal_knots, t);
  return m.level_log_hazards[l] + detail::dot(m.covariate_coeffs, z);
}

inline double log_hazard(const CsModel& m, double t, std::span<const double> z) {
  return std::visit([&](const auto& mm) { return log_hazard(mm, t, z); }, m);
}

inline double cum_hazard(const WeibullCsModel& m, double t,
                         std::span<const double> z) {
  if (!(t >= 0.0)) throw NumericError("cum_hazard requires t >= 0");
  if (t == 0.0) return 0.0;
  const double log_u = m.intercept + detail::dot(m.covariate_coeffs, z);
  const double u = std::exp(log_u);
  return u == 0.0 ? 0.0 : u * std::pow(t, m.shape);
}

inline double cum_hazard(const PchCsModel& m, double t,
                         std::span<const double> z) {
  if (!(t >= 0.0)) throw NumericError("cum_hazard requires t >= 0");
  if (t == 0.0) return 0.0;
  const double shift = detail::dot(m.covariate_coeffs, z);
  double total = 0.0;
  double lo = 0.0;
  for (std::size_t l = 0; l <= m.internal_knots.size(); ++l) {
    const double hi =
        l < m.internal_knots.size() ? m.internal_knots[l] : kInf;
    const double len = std::min(t, hi) - lo;
    if (len <= 0.0) break;
    total += std::exp(m.level_log_hazards[l] + shift) * len;
    lo = hi;
  }
  return total;
}

inline double cum_hazard(const CsModel& m, double t, std::span<const double> z) {
  return std::visit([&](const auto& mm) { return cum_hazard(mm, t, z); }, m);
}

// ---------------------------------------------------------------------------
// Priors

struct NormalPrior {
  double mean = 0.0, sd = 1.0;
};
struct ExponentialPrior {
  double rate = 1.0;
};
struct BetaPrior {
  double a = 1.0, b = 1.0;
};
struct FlatPrior {};

using Prior = std::variant<NormalPrior, ExponentialPrior, BetaPrior, FlatPrior>;

inline double log_prior_density(const Prior& prior, double x) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NormalPrior>) {
          return log_normal_pdf(x, p.mean, p.sd);
        } else if constexpr (std::is_same_v<T, ExponentialPrior>) {
          return log_exponential_pdf(x, p.rate);
        } else if constexpr (std::is_same_v<T, BetaPrior>) {
          return log_beta_pdf(x, p.a, p.b);
        } else {
          return 0.0;
        }
      },
      prior);
}

// First level gets its own prior; successive differences are Normal(0, tau)
// with tau itself Exponential-distributed.
struct RandomWalk1Prior {
  NormalPrior first{0.0, 20.0};
  ExponentialPrior tau_hyper{1.0};
};

inline double random_walk1_log_density(std::span<const double> levels,
                                       const RandomWalk1Prior& prior,
                                       double tau) {
  if (!(tau > 0.0)) return kNegInf;
  double lp = log_normal_pdf(levels[0], prior.first.mean, prior.first.sd);
  for (std::size_t l = 1; l < levels.size(); ++l) {
    lp += log_normal_pdf(levels[l] - levels[l - 1], 0.0, tau);
  }
  lp += log_exponential_pdf(tau, prior.tau_hyper.rate);
  return lp;
}

// Priors for one cause-specific model. Weibull uses intercept/coeffs/shape;
// PCH uses levels (random-walk or fixed per-level) and coeffs.
struct ModelPriors {
  Prior intercept = NormalPrior{0.0, 20.0};
  std::vector<Prior> coeffs;
  Prior shape = ExponentialPrior{1.0};
  std::optional<RandomWalk1Prior> levels_rw;
  std::vector<Prior> level_priors;
};

// ---------------------------------------------------------------------------
// Model sets over (cause, arm) strata

// Maps model covariate names onto dataset columns; the name "arm" resolves
// to the randomisation arm field.
struct CovariateBinding {
  std::vector<std::string> names;
  std::vector<int> indices;  // schema index, or -1 for arm

  void resolve(const DatasetSchema& schema) {
    indices.clear();
    for (const auto& name : names) {
      if (name == "arm") {
        indices.push_back(-1);
        continue;
      }
      const int idx = schema.covariate_index(name);
      if (idx < 0) {
        throw ConfigError("model covariate '" + name +
                          "' not found in dataset schema");
      }
      indices.push_back(idx);
    }
  }

  std::vector<double> row(const SubjectRecord& r) const {
    std::vector<double> z(indices.size());
    fill(r, z);
    return z;
  }

  void fill(const SubjectRecord& r, std::vector<double>& z) const {
    z.resize(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
      z[j] = indices[j] < 0 ? static_cast<double>(r.arm)
                            : r.covariates[static_cast<std::size_t>(indices[j])];
    }
  }
};

// One fitted/fixed cause-specific model; arm = -1 when arms are pooled and
// the arm enters through a covariate coefficient. rw_tau carries the
// random-walk step scale when the PCH levels use the hierarchical prior.
struct StratumModel {
  int cause = 1;
  int arm = -1;
  CsModel model;
  std::optional<double> rw_tau;
};

struct CauseModelSet {
  bool stratified_by_arm = true;
  CovariateBinding binding;
  std::vector<StratumModel> strata;

  const StratumModel& model_for(int cause, int arm) const {
    for (const auto& s : strata) {
      if (s.cause == cause && (!stratified_by_arm || s.arm == arm)) return s;
    }
    throw ConfigError("no model for cause " + std::to_string(cause) +
                      ", arm " + std::to_string(arm));
  }
};

// Standard cause-specific competing-risks log-likelihood: event records
// contribute the log-hazard of their cause, every record contributes the
// negated cumulative hazards of all causes.
inline double log_likelihood(const CauseModelSet& models,
                             const CompetingRiskDataset& data) {
  double total = 0.0;
  std::vector<double> z;
  for (const auto& r : data.records) {
    models.binding.fill(r, z);
    double contrib = 0.0;
    for (int cause = 1; cause <= 2; ++cause) {
      const auto& sm = models.model_for(cause, r.arm);
      contrib -= cum_hazard(sm.model, r.time, z);
      if (r.event == cause) contrib += log_hazard(sm.model, r.time, z);
    }
    if (!std::isfinite(contrib)) {
      throw NumericError("non-finite log-likelihood contribution for subject '" +
                         r.subject_id + "'");
    }
    total += contrib;
  }
  return total;
}

inline double log_prior(const StratumModel& sm, const ModelPriors& priors) {
  double lp = 0.0;
  if (const auto* w = std::get_if<WeibullCsModel>(&sm.model)) {
    lp += log_prior_density(priors.intercept, w->intercept);
    for (std::size_t j = 0; j < w->covariate_coeffs.size(); ++j) {
      lp += log_prior_density(priors.coeffs.at(j), w->covariate_coeffs[j]);
    }
    lp += log_prior_density(priors.shape, w->shape);
  } else {
    const auto& p = std::get<PchCsModel>(sm.model);
    if (priors.levels_rw) {
      if (!sm.rw_tau) return kNegInf;
      lp += random_walk1_log_density(p.level_log_hazards, *priors.levels_rw,
                                     *sm.rw_tau);
    } else {
      for (std::size_t l = 0; l < p.level_log_hazards.size(); ++l) {
        lp += log_prior_density(priors.level_priors.at(l),
                                p.level_log_hazards[l]);
      }
    }
    for (std::size_t j = 0; j < p.covariate_coeffs.size(); ++j) {
      lp += log_prior_density(priors.coeffs.at(j), p.covariate_coeffs[j]);
    }
  }
  return lp;
}

inline double log_prior(const CauseModelSet& models,
                        const std::vector<ModelPriors>& priors) {
  double lp = 0.0;
  for (std::size_t i = 0; i < models.strata.size(); ++i) {
    lp += log_prior(models.strata[i], priors.at(i));
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Hazard pair bound to one covariate profile

// Both causes' models for one arm, evaluated at fixed covariates. This is the
// unit the outcome simulator works with.
struct BoundHazardPair {
  const CsModel* cause1 = nullptr;
  const CsModel* cause2 = nullptr;
  std::vector<double> z1, z2;

  double log_hazard_of(int cause, double t) const {
    return cause == 1 ? log_hazard(*cause1, t, z1) : log_hazard(*cause2, t, z2);
  }

  double hazard_of(int cause, double t) const {
    const double lh = log_hazard_of(cause, t);
    return lh == kNegInf ? 0.0 : std::exp(lh);
  }

  double total_cum_hazard(double t) const {
    return cum_hazard(*cause1, t, z1) + cum_hazard(*cause2, t, z2);
  }
};

inline BoundHazardPair bind_pair(const CauseModelSet& models,
                                 const SubjectRecord& r) {
  BoundHazardPair pair;
  pair.cause1 = &models.model_for(1, r.arm).model;
  pair.cause2 = &models.model_for(2, r.arm).model;
  pair.z1 = models.binding.row(r);
  pair.z2 = pair.z1;
  return pair;
}

// Conditional probability that an event occurring at t is of cause 1.
inline double cause_probability(const BoundHazardPair& pair, double t) {
  const double lh1 = pair.log_hazard_of(1, t);
  const double lh2 = pair.log_hazard_of(2, t);
  if (lh1 == kNegInf && lh2 == kNegInf) {
    throw NumericError("cause probability undefined: both hazards are zero");
  }
  if (lh1 == kNegInf) return 0.0;
  if (lh2 == kNegInf) return 1.0;
  return 1.0 / (1.0 + std::exp(lh2 - lh1));
}

namespace detail {

// Exact single-interval piece of int lambda_i * S: on (a,b] with constant
// cause hazards h_i and survival S(a) at entry,
// contribution = S(a) * h_i/h_tot * (1 - exp(-h_tot*(b-a))).
inline double pch_cif_exact(const PchCsModel& m1, const PchCsModel& m2,
                            std::span<const double> z1,
                            std::span<const double> z2, double t, int cause) {
  std::vector<double> cuts{0.0};
  for (double q : m1.internal_knots) {
    if (q < t) cuts.push_back(q);
  }
  for (double q : m2.internal_knots) {
    if (q < t) cuts.push_back(q);
  }
  cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double s1 = dot(m1.covariate_coeffs, z1);
  const double s2 = dot(m2.covariate_coeffs, z2);
  double cum = 0.0;       // total cumulative hazard at segment start
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    const double mid = 0.5 * (a + b);
    const double h1 = std::exp(m1.level_log_hazards[pch_interval(m1.internal_knots, mid)] + s1);
    const double h2 = std::exp(m2.level_log_hazards[pch_interval(m2.internal_knots, mid)] + s2);
    const double htot = h1 + h2;
    const double hi = cause == 1 ? h1 : h2;
    if (htot > 0.0 && hi > 0.0) {
      integral += std::exp(-cum) * hi / htot * (-std::expm1(-htot * (b - a)));
    }
    cum += htot * (b - a);
  }
  return integral;
}

}  // namespace detail

// Crude cumulative incidence F_cause(t) = int_0^t lambda_cause(u) S(u) du.
// PCH pairs integrate in closed form; otherwise adaptive quadrature under the
// substitution u = t*s^k, which removes the Weibull t^(shape-1) singularity
// at zero when shape < 1.
inline double cif(const BoundHazardPair& pair, double t, int cause,
                  double tol = 1e-10) {
  if (!(t >= 0.0)) throw NumericError("cif requires t >= 0");
  if (t == 0.0) return 0.0;

  const auto* p1 = std::get_if<PchCsModel>(pair.cause1);
  const auto* p2 = std::get_if<PchCsModel>(pair.cause2);
  if (p1 && p2) {
    return detail::pch_cif_exact(*p1, *p2, pair.z1, pair.z2, t, cause);
  }

  double k = 1.0;
  for (const CsModel* m : {pair.cause1, pair.cause2}) {
    if (const auto* w = std::get_if<WeibullCsModel>(m)) {
      k = std::max(k, 1.0 / w->shape);
    }
  }

  const auto integrand = [&](double s) -> double {
    if (s <= 0.0) {
      // Limit of lambda_cause(t*s^k) * S(.) * t*k*s^(k-1) as s -> 0.
      if (const auto* w = std::get_if<WeibullCsModel>(
              cause == 1 ? pair.cause1 : pair.cause2)) {
        if (k * w->shape == 1.0) {
          const double log_u =
              w->intercept +
              detail::dot(w->covariate_coeffs, cause == 1 ? pair.z1 : pair.z2);
          return std::exp(log_u) * w->shape * k * std::pow(t, w->shape);
        }
        return 0.0;
      }
      // PCH cause: s^(k-1) kills the limit unless k == 1.
      if (k == 1.0) {
        const auto& p = std::get<PchCsModel>(cause == 1 ? *pair.cause1
                                                        : *pair.cause2);
        const double shift =
            detail::dot(p.covariate_coeffs, cause == 1 ? pair.z1 : pair.z2);
        return std::exp(p.level_log_hazards[0] + shift) * t;
      }
      return 0.0;
    }
    const double u = t * std::pow(s, k);
    const double log_lh = pair.log_hazard_of(cause, u);
    if (log_lh == kNegInf) return 0.0;
    const double log_g = log_lh - pair.total_cum_hazard(u) + std::log(t * k) +
                         (k - 1.0) * std::log(s);
    return std::exp(log_g);
  };

  // Split at preimages of PCH knots so each quadrature piece is smooth.
  std::vector<double> cuts{0.0, 1.0};
  for (const CsModel* m : {pair.cause1, pair.cause2}) {
    if (const auto* p = std::get_if<PchCsModel>(m)) {
      for (double q : p->internal_knots) {
        if (q < t) cuts.push_back(std::pow(q / t, 1.0 / k));
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += integrate(integrand, cuts[i], cuts[i + 1], tol);
  }
  return total;
}

inline double event_free_survival(const BoundHazardPair& pair, double t) {
  return std::exp(-pair.total_cum_hazard(t));
}

}  // namespace ppos
