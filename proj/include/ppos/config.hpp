#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppos/errors.hpp"
#include "ppos/orchestrator.hpp"
#include "ppos/synthetic.hpp"

namespace ppos {

using ordered_json = nlohmann::ordered_json;

inline ordered_json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
}

namespace cfg {

template <typename T>
T require(const ordered_json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing config key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const ordered_json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

inline Prior parse_prior(const ordered_json& j) {
  const auto dist = require<std::string>(j, "dist");
  if (dist == "normal") {
    const double sd = require<double>(j, "sd");
    if (!(sd > 0.0)) throw ConfigError("normal prior sd must be positive");
    return NormalPrior{require<double>(j, "mean"), sd};
  }
  if (dist == "exponential") {
    const double rate = require<double>(j, "rate");
    if (!(rate > 0.0)) throw ConfigError("exponential prior rate must be positive");
    return ExponentialPrior{rate};
  }
  if (dist == "beta") {
    const double a = require<double>(j, "a"), b = require<double>(j, "b");
    if (!(a > 0.0 && b > 0.0)) throw ConfigError("beta prior needs positive a, b");
    return BetaPrior{a, b};
  }
  if (dist == "flat") return FlatPrior{};
  throw ConfigError("unknown prior distribution '" + dist + "'");
}

inline SamplerConfig parse_sampler(const ordered_json& j,
                                   SamplerConfig defaults = {}) {
  SamplerConfig s = defaults;
  s.n_chains = get_or(j, "chains", s.n_chains);
  s.n_warmup = get_or(j, "warmup", s.n_warmup);
  s.n_draws = get_or(j, "draws", s.n_draws);
  s.ess_min = get_or(j, "ess_min", s.ess_min);
  s.rhat_max = get_or(j, "rhat_max", s.rhat_max);
  s.target_accept = get_or(j, "target_accept", s.target_accept);
  if (s.n_chains < 1 || s.n_draws < 1 || s.n_warmup < 0) {
    throw ConfigError("sampler block: chains/draws/warmup out of range");
  }
  if (!(s.rhat_max > 1.0) || !(s.ess_min > 0.0)) {
    throw ConfigError("sampler block: need rhat_max > 1 and ess_min > 0");
  }
  return s;
}

inline PredictionModelSpec parse_models(const ordered_json& j) {
  PredictionModelSpec m;
  const auto mode = get_or<std::string>(j, "mode", "stratified");
  if (mode == "stratified") {
    m.stratified = true;
  } else if (mode == "proportional") {
    m.stratified = false;
  } else {
    throw ConfigError("models.mode must be 'stratified' or 'proportional'");
  }
  const auto family = require<std::string>(j, "family");
  if (family == "weibull") {
    m.weibull = true;
  } else if (family == "pch") {
    m.weibull = false;
    m.pch_knots_cause1 = require<std::vector<double>>(j, "knots_cause1");
    m.pch_knots_cause2 = require<std::vector<double>>(j, "knots_cause2");
  } else {
    throw ConfigError("models.family must be 'weibull' or 'pch'");
  }
  m.covariates = get_or<std::vector<std::string>>(j, "covariates", {});
  if (j.contains("priors")) {
    const auto& p = j.at("priors");
    if (p.contains("intercept")) m.intercept_prior = parse_prior(p.at("intercept"));
    if (p.contains("coeff")) m.coeff_prior = parse_prior(p.at("coeff"));
    if (p.contains("shape")) m.shape_prior = parse_prior(p.at("shape"));
    if (p.contains("arm_cause1")) m.arm_prior_cause1 = parse_prior(p.at("arm_cause1"));
    if (p.contains("arm_cause2")) m.arm_prior_cause2 = parse_prior(p.at("arm_cause2"));
    if (p.contains("level1")) {
      const Prior first = parse_prior(p.at("level1"));
      if (const auto* n = std::get_if<NormalPrior>(&first)) {
        m.levels_rw.first = *n;
      } else {
        throw ConfigError("priors.level1 must be normal");
      }
    }
    if (p.contains("level_rw_tau")) {
      const Prior tau = parse_prior(p.at("level_rw_tau"));
      if (const auto* e = std::get_if<ExponentialPrior>(&tau)) {
        m.levels_rw.tau_hyper = *e;
      } else {
        throw ConfigError("priors.level_rw_tau must be exponential");
      }
    }
  }
  return m;
}

inline EnrollmentSpec parse_enrollment(const ordered_json& j) {
  EnrollmentSpec e;
  e.n_new_fixed_arm = require<int>(j, "n_new_fixed_arm");
  e.fixed_arm = get_or(j, "fixed_arm", 1);
  e.randomization_prob = require<double>(j, "randomization_prob");
  if (e.n_new_fixed_arm < 0) throw ConfigError("enrollment: negative count");
  if (j.contains("covariates")) {
    for (const auto& c : j.at("covariates")) {
      EnrollmentSpec::BinaryCovariateModel cm;
      cm.name = require<std::string>(c, "name");
      cm.prior = BetaPrior{get_or(c, "prior_a", 1.0), get_or(c, "prior_b", 1.0)};
      e.covariate_models.push_back(std::move(cm));
    }
  }
  return e;
}

inline CensoringRule parse_censoring(const ordered_json& j) {
  CensoringRule c;
  const auto mode = require<std::string>(j, "mode");
  if (mode == "none") {
    c.mode = CensoringRule::Mode::none;
  } else if (mode == "scalar") {
    c.mode = CensoringRule::Mode::scalar;
    c.horizon = require<double>(j, "horizon");
  } else if (mode == "calendar") {
    c.mode = CensoringRule::Mode::calendar;
    c.horizon = require<double>(j, "horizon");
  } else {
    throw ConfigError("censoring.mode must be 'none', 'scalar' or 'calendar'");
  }
  return c;
}

inline AnalysisSpec parse_analysis(const ordered_json& j,
                                   const CensoringRule& censoring) {
  AnalysisSpec a;
  const auto kind = require<std::string>(j, "kind");
  if (kind == "bayes_graduation") {
    a.kind = AnalysisSpec::Kind::bayes_graduation;
    a.graduation.cause = get_or(j, "cause", 1);
    a.graduation.hazard_ratio_null = get_or(j, "hazard_ratio_null", 1.0);
    a.graduation.threshold = get_or(j, "threshold", 0.975);
    a.graduation.covariates =
        get_or<std::vector<std::string>>(j, "covariates", {});
    a.graduation.priors.coeffs.assign(a.graduation.covariates.size() + 1,
                                      NormalPrior{0.0, 0.7071067811865476});
    if (j.contains("sampler")) {
      a.graduation.sampler = parse_sampler(j.at("sampler"), a.graduation.sampler);
    }
    if (!(a.graduation.threshold > 0.0 && a.graduation.threshold < 1.0)) {
      throw ConfigError("analysis.threshold must be in (0,1)");
    }
  } else if (kind == "rr_test") {
    a.kind = AnalysisSpec::Kind::rr_test;
    a.rr.alpha = get_or(j, "alpha", 0.035);
    a.rr.exposed_arm = get_or(j, "exposed_arm", 1);
    const double fallback =
        censoring.mode == CensoringRule::Mode::none ? 0.0 : censoring.horizon;
    a.rr.eval_time = get_or(j, "eval_time", fallback);
    if (!(a.rr.alpha > 0.0 && a.rr.alpha < 1.0)) {
      throw ConfigError("analysis.alpha must be in (0,1)");
    }
    if (!(a.rr.eval_time > 0.0)) {
      throw ConfigError("analysis.eval_time must be positive");
    }
  } else {
    throw ConfigError("analysis.kind must be 'bayes_graduation' or 'rr_test'");
  }
  return a;
}

inline ScenarioGrid parse_grid(const ordered_json& j) {
  ScenarioGrid g;
  const auto axis = require<std::string>(j, "axis");
  if (axis == "prior") {
    g.axis = ScenarioGrid::Axis::prior;
    g.mus = require<std::vector<double>>(j, "mus");
    g.sigmas = require<std::vector<double>>(j, "sigmas");
    if (g.mus.empty() || g.sigmas.empty()) {
      throw ConfigError("prior grid needs nonempty mus and sigmas");
    }
  } else if (axis == "horizon") {
    g.axis = ScenarioGrid::Axis::horizon;
    g.horizons = require<std::vector<double>>(j, "horizons");
    if (g.horizons.empty()) throw ConfigError("horizon grid is empty");
  } else {
    throw ConfigError("scenarios.axis must be 'prior' or 'horizon'");
  }
  return g;
}

}  // namespace cfg

// Everything a CLI run needs, with the effective configuration retained
// verbatim for provenance.
struct RunConfig {
  std::string dataset_path;
  DatasetSchema schema;
  std::string time_unit = "days";
  PposConfig ppos;
  std::optional<ScenarioGrid> grid;
  ordered_json echo;
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<int> workers;
};

inline RunConfig parse_run_config(ordered_json j, const RunOverrides& ov = {}) {
  if (ov.seed) j["seed"] = *ov.seed;
  if (ov.k) j["k"] = *ov.k;
  if (ov.workers) j["workers"] = *ov.workers;

  RunConfig rc;
  rc.ppos.workers = cfg::get_or(j, "workers", 1);
  // worker count is an execution detail: results do not depend on it, so it
  // stays out of the echoed configuration
  j.erase("workers");
  rc.dataset_path = cfg::require<std::string>(j, "dataset");
  rc.schema.covariate_names =
      cfg::get_or<std::vector<std::string>>(j, "covariates", {});
  rc.schema.has_origin_offset = cfg::get_or(j, "origin_offset", false);
  rc.time_unit = cfg::get_or<std::string>(j, "time_unit", "days");

  rc.ppos.k = cfg::get_or(j, "k", 2500);
  if (rc.ppos.k < 1) throw ConfigError("k must be >= 1");
  rc.ppos.master_seed = cfg::get_or<std::uint64_t>(j, "seed", 1);
  rc.ppos.curve_grid = cfg::get_or(j, "curve_grid", 0);
  rc.ppos.invalid_abort_fraction = cfg::get_or(j, "invalid_abort_fraction", 0.01);

  if (!j.contains("models")) throw ConfigError("missing config key 'models'");
  rc.ppos.models = cfg::parse_models(j.at("models"));
  if (j.contains("sampler")) {
    rc.ppos.modeling_sampler = cfg::parse_sampler(j.at("sampler"));
  }
  if (j.contains("enrollment") && !j.at("enrollment").is_null()) {
    rc.ppos.enrollment = cfg::parse_enrollment(j.at("enrollment"));
  }
  if (j.contains("censoring")) {
    rc.ppos.censoring = cfg::parse_censoring(j.at("censoring"));
  }
  if (!j.contains("analysis")) throw ConfigError("missing config key 'analysis'");
  rc.ppos.analysis = cfg::parse_analysis(j.at("analysis"), rc.ppos.censoring);
  if (j.contains("scenarios")) rc.grid = cfg::parse_grid(j.at("scenarios"));

  rc.echo = std::move(j);
  return rc;
}

// Synthetic-data specification files for the `simulate` subcommand.
inline SyntheticSpec parse_synthetic_spec(const ordered_json& j) {
  SyntheticSpec s;
  s.seed = cfg::get_or<std::uint64_t>(j, "seed", 0);
  s.time_unit = cfg::get_or<std::string>(j, "time_unit", "days");
  s.id_prefix = cfg::get_or<std::string>(j, "id_prefix", "s");

  if (j.contains("covariates")) {
    for (const auto& c : j.at("covariates")) {
      CovariateGenerator g;
      g.name = cfg::require<std::string>(c, "name");
      const auto dist = cfg::require<std::string>(c, "dist");
      if (dist == "bernoulli") {
        g.kind = CovariateGenerator::Kind::bernoulli;
        g.p = cfg::require<double>(c, "p");
      } else if (dist == "uniform") {
        g.kind = CovariateGenerator::Kind::uniform;
        g.lo = cfg::require<double>(c, "lo");
        g.hi = cfg::require<double>(c, "hi");
      } else if (dist == "normal") {
        g.kind = CovariateGenerator::Kind::normal;
        g.mean = cfg::require<double>(c, "mean");
        g.sd = cfg::require<double>(c, "sd");
      } else {
        throw ConfigError("covariate dist must be bernoulli, uniform or normal");
      }
      g.round_to = cfg::get_or(c, "round_to", 0.0);
      s.covariates.push_back(std::move(g));
    }
  }

  for (const auto& a : cfg::require<ordered_json>(j, "arms")) {
    s.arms.push_back({cfg::require<int>(a, "arm"), cfg::require<int>(a, "n")});
  }

  const auto& truth = j.at("truth");
  s.truth.stratified_by_arm = cfg::get_or(truth, "stratified", true);
  s.truth.binding.names =
      cfg::get_or<std::vector<std::string>>(truth, "covariates", {});
  for (const auto& st : cfg::require<ordered_json>(truth, "strata")) {
    StratumModel sm;
    sm.cause = cfg::require<int>(st, "cause");
    sm.arm = cfg::get_or(st, "arm", -1);
    const auto family = cfg::require<std::string>(st, "family");
    const auto coeffs = cfg::get_or<std::vector<double>>(st, "coeffs", {});
    if (family == "weibull") {
      WeibullCsModel m;
      const auto icpt = st.at("intercept");
      m.intercept = icpt.is_string() && icpt.get<std::string>() == "-inf"
                        ? kNegInf
                        : icpt.get<double>();
      m.covariate_coeffs = coeffs;
      m.shape = cfg::require<double>(st, "shape");
      sm.model = m;
    } else if (family == "pch") {
      PchCsModel m;
      m.internal_knots = cfg::get_or<std::vector<double>>(st, "knots", {});
      for (const auto& r : cfg::require<ordered_json>(st, "rates")) {
        m.level_log_hazards.push_back(std::log(r.get<double>()));
      }
      m.covariate_coeffs = coeffs;
      sm.model = m;
    } else {
      throw ConfigError("truth family must be 'weibull' or 'pch'");
    }
    s.truth.strata.push_back(std::move(sm));
  }

  if (j.contains("censoring")) {
    const auto& c = j.at("censoring");
    const auto mode = cfg::require<std::string>(c, "mode");
    if (mode == "none") {
      s.censoring.kind = SyntheticCensoring::Kind::none;
    } else if (mode == "scalar") {
      s.censoring.kind = SyntheticCensoring::Kind::scalar;
      s.censoring.horizon = cfg::require<double>(c, "horizon");
    } else if (mode == "staggered") {
      s.censoring.kind = SyntheticCensoring::Kind::staggered;
      s.censoring.accrual_window = cfg::require<double>(c, "accrual_window");
      s.censoring.cutoff = cfg::require<double>(c, "cutoff");
      s.censoring.admin_cap = cfg::get_or(c, "admin_cap", 0.0);
    } else {
      throw ConfigError("synthetic censoring mode must be none, scalar or staggered");
    }
  }
  return s;
}

}  // namespace ppos
