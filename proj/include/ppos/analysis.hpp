#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppos/dataset.hpp"
#include "ppos/errors.hpp"
#include "ppos/math.hpp"
#include "ppos/model_fit.hpp"

namespace ppos {

// Nonparametric cumulative incidence curves with pointwise variances.
// Right-continuous step functions; rows are the distinct event times.
struct CifEstimate {
  std::vector<double> times;
  std::vector<double> cif1, cif2, surv;
  std::vector<double> var1, var2;
  std::vector<double> n_risk;
  std::size_t n_subjects = 0;

  std::ptrdiff_t index_at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return it - times.begin() - 1;
  }

  double cif_at(double t, int cause) const {
    const auto i = index_at(t);
    if (i < 0) return 0.0;
    return (cause == 1 ? cif1 : cif2)[static_cast<std::size_t>(i)];
  }

  double var_at(double t, int cause) const {
    const auto i = index_at(t);
    if (i < 0) return 0.0;
    return (cause == 1 ? var1 : var2)[static_cast<std::size_t>(i)];
  }

  double surv_at(double t) const {
    const auto i = index_at(t);
    if (i < 0) return 1.0;
    return surv[static_cast<std::size_t>(i)];
  }
};

// Aalen-Johansen estimator. At each event time the cause-i increment is
// S(t-) d_i/n; ties of both causes and censorings share the at-risk set.
// Pointwise variances use the Aalen-type counting-process estimator (see
// docs/analysis_methods.md), accumulated in O(1) per jump.
inline CifEstimate aalen_johansen(const CompetingRiskDataset& data,
                                  std::optional<int> arm = std::nullopt) {
  std::vector<std::pair<double, int>> obs;  // (time, event)
  obs.reserve(data.records.size());
  for (const auto& r : data.records) {
    if (arm && r.arm != *arm) continue;
    obs.emplace_back(r.time, r.event);
  }
  if (obs.empty()) throw DataError("aalen_johansen: empty group");
  std::sort(obs.begin(), obs.end());

  CifEstimate est;
  est.n_subjects = obs.size();

  double surv_prev = 1.0;  // S(t-)
  double f1 = 0.0, f2 = 0.0;
  // running sums for the variance recursion
  double sa = 0.0;                  // sum of d/(n(n-d))
  double sfa1 = 0.0, sf2a1 = 0.0;   // sums of F1_j*A_j, F1_j^2*A_j
  double sfa2 = 0.0, sf2a2 = 0.0;
  double sb1 = 0.0, sc1 = 0.0, sfc1 = 0.0;
  double sb2 = 0.0, sc2 = 0.0, sfc2 = 0.0;

  std::size_t i = 0;
  std::size_t at_risk = obs.size();
  while (i < obs.size()) {
    const double t = obs[i].first;
    std::size_t d1 = 0, d2 = 0, tied = 0;
    while (i < obs.size() && obs[i].first == t) {
      d1 += obs[i].second == 1;
      d2 += obs[i].second == 2;
      ++tied;
      ++i;
    }
    const double n = static_cast<double>(at_risk);
    const double d = static_cast<double>(d1 + d2);
    if (d > 0.0) {
      f1 += surv_prev * static_cast<double>(d1) / n;
      f2 += surv_prev * static_cast<double>(d2) / n;
      const double surv_new = surv_prev * (1.0 - d / n);

      const double a = d < n ? d / (n * (n - d)) : 0.0;
      sa += a;
      sfa1 += f1 * a;
      sf2a1 += f1 * f1 * a;
      sfa2 += f2 * a;
      sf2a2 += f2 * f2 * a;
      const double b1 = surv_prev * surv_prev * (n - d1) * d1 / (n * n * n);
      const double b2 = surv_prev * surv_prev * (n - d2) * d2 / (n * n * n);
      const double c1 = surv_prev * static_cast<double>(d1) / (n * n);
      const double c2 = surv_prev * static_cast<double>(d2) / (n * n);
      sb1 += b1;
      sc1 += c1;
      sfc1 += f1 * c1;
      sb2 += b2;
      sc2 += c2;
      sfc2 += f2 * c2;

      est.times.push_back(t);
      est.cif1.push_back(f1);
      est.cif2.push_back(f2);
      est.surv.push_back(surv_new);
      est.n_risk.push_back(n);
      est.var1.push_back(std::max(
          0.0, f1 * f1 * sa - 2.0 * f1 * sfa1 + sf2a1 + sb1 - 2.0 * f1 * sc1 +
                   2.0 * sfc1));
      est.var2.push_back(std::max(
          0.0, f2 * f2 * sa - 2.0 * f2 * sfa2 + sf2a2 + sb2 - 2.0 * f2 * sc2 +
                   2.0 * sfc2));
      surv_prev = surv_new;
    }
    at_risk -= tied;
  }
  return est;
}

struct RiskRatioResult {
  double rr = kNaN;
  double log_rr = kNaN;
  double ase_log_rr = kNaN;
  double p_value = kNaN;
  double eval_time = 0.0;
  bool success = false;
  bool degenerate = false;
};

// Delta-method two-sided test of RR = F1_exposed / F1_referent at eval_time.
inline RiskRatioResult risk_ratio_from_estimates(double f_exposed,
                                                 double var_exposed,
                                                 double f_referent,
                                                 double var_referent,
                                                 double eval_time, double alpha) {
  RiskRatioResult res;
  res.eval_time = eval_time;
  if (!(f_exposed > 0.0) || !(f_referent > 0.0)) {
    res.degenerate = true;
    return res;
  }
  res.rr = f_exposed / f_referent;
  res.log_rr = std::log(res.rr);
  const double var_log = var_exposed / (f_exposed * f_exposed) +
                         var_referent / (f_referent * f_referent);
  res.ase_log_rr = std::sqrt(var_log);
  if (!(res.ase_log_rr > 0.0)) {
    res.degenerate = true;
    return res;
  }
  res.p_value = two_sided_p(res.log_rr / res.ase_log_rr);
  res.success = res.p_value <= alpha;
  return res;
}

inline RiskRatioResult risk_ratio_test(const CifEstimate& exposed,
                                       const CifEstimate& referent,
                                       double eval_time, double alpha) {
  return risk_ratio_from_estimates(
      exposed.cif_at(eval_time, 1), exposed.var_at(eval_time, 1),
      referent.cif_at(eval_time, 1), referent.var_at(eval_time, 1), eval_time,
      alpha);
}

// ---------------------------------------------------------------------------
// Bayesian proportional-hazards graduation

struct GraduationSpec {
  int cause = 1;
  double hazard_ratio_null = 1.0;  // success is exp(arm coeff) above this
  double threshold = 0.975;
  std::vector<std::string> covariates;  // besides arm
  ModelPriors priors;                   // coeffs[0] is the arm coefficient
  SamplerConfig sampler;

  GraduationSpec() {
    priors.intercept = NormalPrior{0.0, 20.0};
    priors.coeffs = {NormalPrior{0.0, std::sqrt(0.5)}};
    priors.shape = ExponentialPrior{1.0};
    sampler.ess_min = 100.0;
    sampler.rhat_max = 1.05;
  }
};

struct GraduationResult {
  double posterior_prob = 0.0;
  bool success = false;
  bool converged = false;
  double min_ess = 0.0;
  double max_rhat = 0.0;
};

// Weibull proportional-hazards fit for one cause with an arm coefficient;
// posterior_prob is the share of draws with csHR above the null value.
inline GraduationResult bayes_ph_graduation(const CompetingRiskDataset& data,
                                            const GraduationSpec& spec) {
  StratumFitSpec fit_spec;
  fit_spec.cause = spec.cause;
  fit_spec.arm = -1;
  fit_spec.weibull = true;
  fit_spec.binding.names = {"arm"};
  for (const auto& c : spec.covariates) fit_spec.binding.names.push_back(c);
  fit_spec.priors = spec.priors;
  while (fit_spec.priors.coeffs.size() < fit_spec.binding.names.size()) {
    fit_spec.priors.coeffs.push_back(NormalPrior{0.0, std::sqrt(0.5)});
  }

  const auto fit = fit_stratum(data, fit_spec, spec.sampler);
  const std::size_t arm_col = 1;  // intercept, b_arm, ...
  const double log_h0 = std::log(spec.hazard_ratio_null);
  std::size_t above = 0;
  for (std::size_t r = 0; r < fit.draws.n_total(); ++r) {
    above += fit.draws.at(r, arm_col) > log_h0;
  }

  GraduationResult res;
  res.posterior_prob =
      static_cast<double>(above) / static_cast<double>(fit.draws.n_total());
  res.success = res.posterior_prob >= spec.threshold;
  res.min_ess = kInf;
  for (const auto& d : fit.draws.diagnostics) {
    res.min_ess = std::min(res.min_ess, d.degenerate ? 0.0 : d.ess);
    res.max_rhat = std::max(res.max_rhat, d.degenerate ? kInf : d.rhat);
  }
  res.converged =
      fit.draws.converged(spec.sampler.ess_min, spec.sampler.rhat_max);
  return res;
}

// ---------------------------------------------------------------------------
// Decision rules

struct DecisionCriterion {
  std::string statistic;
  enum class Kind { at_least, at_most } kind = Kind::at_least;
  double threshold = 0.5;
};

// Conjunction of one or two criteria; comparisons are inclusive.
struct DecisionRule {
  std::vector<DecisionCriterion> criteria;
};

inline bool evaluate_rule(const std::map<std::string, double>& statistics,
                          const DecisionRule& rule) {
  if (rule.criteria.empty()) throw ConfigError("decision rule has no criteria");
  for (const auto& c : rule.criteria) {
    const auto it = statistics.find(c.statistic);
    if (it == statistics.end()) {
      throw ConfigError("decision rule statistic '" + c.statistic +
                        "' missing from analysis results");
    }
    const double v = it->second;
    const bool ok = c.kind == DecisionCriterion::Kind::at_least
                        ? v >= c.threshold
                        : v <= c.threshold;
    if (!ok) return false;
  }
  return true;
}

}  // namespace ppos
