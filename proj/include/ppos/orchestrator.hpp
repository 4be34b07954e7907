#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ppos/analysis.hpp"
#include "ppos/dataset.hpp"
#include "ppos/errors.hpp"
#include "ppos/math.hpp"
#include "ppos/model_fit.hpp"
#include "ppos/outcome_sim.hpp"
#include "ppos/rng.hpp"

namespace ppos {

// Prediction-phase model layout. Stratified mode fits one model per
// (cause, arm); proportional mode pools arms behind an arm coefficient,
// whose prior can differ by cause (that is the sensitivity-analysis knob).
struct PredictionModelSpec {
  bool stratified = true;
  bool weibull = true;
  std::vector<std::string> covariates;
  std::vector<double> pch_knots_cause1;
  std::vector<double> pch_knots_cause2;

  Prior intercept_prior = NormalPrior{0.0, 20.0};
  Prior coeff_prior = NormalPrior{0.0, 0.7071067811865476};
  Prior shape_prior = ExponentialPrior{1.0};
  RandomWalk1Prior levels_rw{{-10.0, 20.0}, {1.0}};
  Prior arm_prior_cause1 = NormalPrior{0.0, 0.7071067811865476};
  Prior arm_prior_cause2 = NormalPrior{0.0, 0.7071067811865476};

  std::vector<StratumFitSpec> fit_specs() const {
    std::vector<StratumFitSpec> specs;
    const auto fill = [&](StratumFitSpec& s, int cause) {
      s.cause = cause;
      s.weibull = weibull;
      if (!weibull) {
        s.pch_knots = cause == 1 ? pch_knots_cause1 : pch_knots_cause2;
        s.priors.levels_rw = levels_rw;
      }
      s.priors.intercept = intercept_prior;
      s.priors.shape = shape_prior;
    };
    if (stratified) {
      for (int cause : {1, 2}) {
        for (int arm : {0, 1}) {
          StratumFitSpec s;
          fill(s, cause);
          s.arm = arm;
          s.binding.names = covariates;
          s.priors.coeffs.assign(covariates.size(), coeff_prior);
          specs.push_back(std::move(s));
        }
      }
    } else {
      for (int cause : {1, 2}) {
        StratumFitSpec s;
        fill(s, cause);
        s.arm = -1;
        s.binding.names = {"arm"};
        for (const auto& c : covariates) s.binding.names.push_back(c);
        s.priors.coeffs = {cause == 1 ? arm_prior_cause1 : arm_prior_cause2};
        for (std::size_t j = 0; j < covariates.size(); ++j) {
          s.priors.coeffs.push_back(coeff_prior);
        }
        specs.push_back(std::move(s));
      }
    }
    return specs;
  }
};

struct RrTestSpec {
  double eval_time = 0.0;
  double alpha = 0.035;
  int exposed_arm = 1;
};

struct AnalysisSpec {
  enum class Kind { bayes_graduation, rr_test };
  Kind kind = Kind::bayes_graduation;
  GraduationSpec graduation;
  RrTestSpec rr;

  std::string statistic_name() const {
    return kind == Kind::bayes_graduation ? "posterior_prob" : "p_value";
  }

  DecisionRule rule() const {
    DecisionRule r;
    if (kind == Kind::bayes_graduation) {
      r.criteria = {{"posterior_prob", DecisionCriterion::Kind::at_least,
                     graduation.threshold}};
    } else {
      r.criteria = {{"p_value", DecisionCriterion::Kind::at_most, rr.alpha}};
    }
    return r;
  }
};

struct PposConfig {
  int k = 2500;
  std::uint64_t master_seed = 1;
  PredictionModelSpec models;
  SamplerConfig modeling_sampler;
  std::optional<EnrollmentSpec> enrollment;
  CensoringRule censoring;
  AnalysisSpec analysis;
  double invalid_abort_fraction = 0.01;
  int workers = 1;
  int curve_grid = 0;  // store per-replicate CIF curves on this many points
};

struct ReplicateRecord {
  int index = 0;
  std::uint64_t stream = 0;
  double statistic = kNaN;
  bool success = false;
  bool valid = true;
};

struct StratumDiagSummary {
  std::string label;
  double min_ess = 0.0;
  double max_rhat = 0.0;
};

struct ReplicateCurve {
  int replicate = 0;
  int arm = 0;
  std::vector<double> cif1;
};

struct PposResult {
  double ppos = 0.0;
  double mc_se = 0.0;
  int k = 0;
  int k_effective = 0;
  std::uint64_t master_seed = 0;
  bool pool_with_replacement = false;
  std::vector<ReplicateRecord> replicates;
  std::vector<StratumDiagSummary> posterior_diagnostics;
  std::vector<double> curve_times;
  std::vector<ReplicateCurve> curves;
};

inline double mc_standard_error(double ppos, int k) {
  if (k < 1) throw ConfigError("mc_standard_error: k must be >= 1");
  return std::sqrt(ppos * (1.0 - ppos) / static_cast<double>(k));
}

namespace detail {

inline std::string stratum_label(const StratumFitSpec& s) {
  std::string label = "cause" + std::to_string(s.cause);
  label += s.arm < 0 ? "_pooled" : "_arm" + std::to_string(s.arm);
  return label;
}

// K row indices into a draw pool of size `pool`: without replacement via
// partial Fisher-Yates when the pool suffices, otherwise with replacement.
inline std::vector<std::size_t> select_draw_rows(std::size_t pool, int k,
                                                 Philox& rng,
                                                 bool& with_replacement) {
  std::vector<std::size_t> rows;
  rows.reserve(static_cast<std::size_t>(k));
  if (pool >= static_cast<std::size_t>(k)) {
    std::vector<std::size_t> idx(pool);
    for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
    for (int j = 0; j < k; ++j) {
      const std::size_t pick =
          j + static_cast<std::size_t>(rng.uniform01() * (pool - j));
      std::swap(idx[static_cast<std::size_t>(j)],
                idx[std::min(pick, pool - 1)]);
      rows.push_back(idx[static_cast<std::size_t>(j)]);
    }
  } else {
    with_replacement = true;
    for (int j = 0; j < k; ++j) {
      rows.push_back(std::min(
          static_cast<std::size_t>(rng.uniform01() * pool), pool - 1));
    }
  }
  return rows;
}

}  // namespace detail

// Modelling phase: one posterior fit per stratum, convergence-gated unless
// the caller wants the raw fits (the fit subcommand reports, then fails).
inline std::vector<FittedStratum> fit_prediction_models(
    const CompetingRiskDataset& interim, const PposConfig& cfg,
    bool enforce_convergence = true) {
  const auto specs = cfg.models.fit_specs();
  std::vector<FittedStratum> fits;
  fits.reserve(specs.size());
  for (std::size_t f = 0; f < specs.size(); ++f) {
    SamplerConfig scfg = cfg.modeling_sampler;
    scfg.seed = derive_seed(cfg.master_seed, stream::id(stream::kModelFit, f));
    fits.push_back(fit_stratum(interim, specs[f], scfg));
  }
  if (enforce_convergence) {
    for (const auto& fit : fits) {
      const auto bad = fit.draws.flagged(cfg.modeling_sampler.ess_min,
                                         cfg.modeling_sampler.rhat_max);
      if (!bad.empty()) {
        std::string msg = "prediction-phase posterior did not converge for " +
                          detail::stratum_label(fit.spec) + ":";
        for (const auto& name : bad) msg += " " + name;
        throw ConvergenceError(msg);
      }
    }
  }
  return fits;
}

// Full PPoS computation: fit once, then repeat prediction + analysis K times
// with one posterior draw per replicate. Deterministic for a fixed
// master_seed at any worker count.
inline PposResult run_ppos(const CompetingRiskDataset& interim,
                           const PposConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("run_ppos: k must be >= 1");
  interim.validate();
  auto [d_obs, d_cens] = partition_interim(interim);

  const auto fits = fit_prediction_models(interim, cfg);

  PposResult result;
  result.k = cfg.k;
  result.master_seed = cfg.master_seed;
  for (const auto& fit : fits) {
    StratumDiagSummary s;
    s.label = detail::stratum_label(fit.spec);
    s.min_ess = kInf;
    for (const auto& d : fit.draws.diagnostics) {
      s.min_ess = std::min(s.min_ess, d.degenerate ? 0.0 : d.ess);
      s.max_rhat = std::max(s.max_rhat, d.degenerate ? kInf : d.rhat);
    }
    result.posterior_diagnostics.push_back(std::move(s));
  }

  // per-stratum posterior draw rows for each replicate
  std::vector<std::vector<std::size_t>> draw_rows(fits.size());
  for (std::size_t f = 0; f < fits.size(); ++f) {
    Philox rng(cfg.master_seed, stream::id(stream::kDrawSelection, f));
    draw_rows[f] = detail::select_draw_rows(fits[f].draws.n_total(), cfg.k, rng,
                                            result.pool_with_replacement);
  }

  // conjugate posterior for each enrollment covariate model
  std::vector<BetaPrior> eta_posteriors;
  if (cfg.enrollment) {
    for (const auto& cm : cfg.enrollment->covariate_models) {
      const int idx = interim.schema.covariate_index(cm.name);
      if (idx < 0) {
        throw ConfigError("enrollment covariate '" + cm.name +
                          "' not in dataset schema");
      }
      int successes = 0;
      for (const auto& r : interim.records) {
        successes += r.covariates[static_cast<std::size_t>(idx)] != 0.0;
      }
      eta_posteriors.push_back(beta_conjugate_update(
          cm.prior, successes, static_cast<int>(interim.size())));
    }
  }

  const DecisionRule rule = cfg.analysis.rule();
  const bool rr_mode = cfg.analysis.kind == AnalysisSpec::Kind::rr_test;
  if (cfg.curve_grid > 1 && rr_mode) {
    for (int i = 0; i < cfg.curve_grid; ++i) {
      result.curve_times.push_back(cfg.analysis.rr.eval_time * i /
                                   (cfg.curve_grid - 1));
    }
  }

  result.replicates.assign(static_cast<std::size_t>(cfg.k), {});
  std::vector<ReplicateCurve> curves(
      result.curve_times.empty() ? 0 : 2 * static_cast<std::size_t>(cfg.k));

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= cfg.k || failed.load()) return;
      try {
        const std::uint64_t stream_id = stream::id(stream::kReplicate,
                                                   static_cast<std::uint64_t>(k));
        Philox rng(cfg.master_seed, stream_id);

        CauseModelSet draw_set;
        draw_set.stratified_by_arm = cfg.models.stratified;
        draw_set.binding = fits[0].spec.binding;
        for (std::size_t f = 0; f < fits.size(); ++f) {
          draw_set.strata.push_back(
              fits[f].materialize(draw_rows[f][static_cast<std::size_t>(k)]));
        }

        std::vector<double> eta;
        for (const auto& bp : eta_posteriors) eta.push_back(rng.beta(bp.a, bp.b));

        const auto d_f = predict_final_dataset(d_obs, d_cens, draw_set,
                                               cfg.enrollment, eta,
                                               cfg.censoring, rng);

        ReplicateRecord rec;
        rec.index = k;
        rec.stream = stream_id;
        if (rr_mode) {
          const auto exposed =
              aalen_johansen(d_f, cfg.analysis.rr.exposed_arm);
          const auto referent =
              aalen_johansen(d_f, 1 - cfg.analysis.rr.exposed_arm);
          const auto res = risk_ratio_test(exposed, referent,
                                           cfg.analysis.rr.eval_time,
                                           cfg.analysis.rr.alpha);
          rec.statistic = res.p_value;
          rec.success = !res.degenerate &&
                        evaluate_rule({{"p_value", res.p_value}}, rule);
          if (!result.curve_times.empty()) {
            ReplicateCurve c1{k, cfg.analysis.rr.exposed_arm, {}};
            ReplicateCurve c0{k, 1 - cfg.analysis.rr.exposed_arm, {}};
            for (double t : result.curve_times) {
              c1.cif1.push_back(exposed.cif_at(t, 1));
              c0.cif1.push_back(referent.cif_at(t, 1));
            }
            curves[2 * static_cast<std::size_t>(k)] = std::move(c1);
            curves[2 * static_cast<std::size_t>(k) + 1] = std::move(c0);
          }
        } else {
          GraduationSpec gspec = cfg.analysis.graduation;
          gspec.sampler.seed = rng.next_u64();
          try {
            const auto res = bayes_ph_graduation(d_f, gspec);
            rec.statistic = res.posterior_prob;
            rec.valid = res.converged;
            rec.success = res.converged &&
                          evaluate_rule({{"posterior_prob", res.posterior_prob}},
                                        rule);
          } catch (const ConvergenceError&) {
            rec.valid = false;
          }
        }
        result.replicates[static_cast<std::size_t>(k)] = rec;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const int n_workers = std::max(1, cfg.workers);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  int successes = 0, valid = 0;
  for (const auto& rec : result.replicates) {
    valid += rec.valid;
    successes += rec.valid && rec.success;
  }
  const int invalid = cfg.k - valid;
  if (static_cast<double>(invalid) >
      cfg.invalid_abort_fraction * static_cast<double>(cfg.k)) {
    throw ReplicateValidityError(
        "too many invalid replicates: " + std::to_string(invalid) + " of " +
        std::to_string(cfg.k));
  }
  if (valid == 0) throw ReplicateValidityError("no valid replicates");

  result.k_effective = valid;
  result.ppos = static_cast<double>(successes) / static_cast<double>(valid);
  result.mc_se = mc_standard_error(result.ppos, valid);
  result.curves = std::move(curves);
  return result;
}

// ---------------------------------------------------------------------------
// Scenario grids

struct ScenarioGrid {
  enum class Axis { prior, horizon };
  Axis axis = Axis::prior;
  std::vector<double> mus;      // prior means for the cause-1 arm coefficient
  std::vector<double> sigmas;   // prior sds
  std::vector<double> horizons; // final-analysis times

  std::size_t size() const {
    return axis == Axis::prior ? mus.size() * sigmas.size() : horizons.size();
  }
};

struct ScenarioResult {
  std::string label;
  double mu = kNaN;
  double sigma = kNaN;
  double horizon = kNaN;
  bool failed = false;
  std::string error;
  PposResult result;
};

// One PPoS per grid cell. Prior cells switch the prediction model to
// proportional-hazards mode and replace the cause-1 arm-coefficient prior;
// horizon cells move the censoring horizon and the analysis time together.
// Each scenario runs under its own seed derived from (master_seed, index).
inline std::vector<ScenarioResult> run_scenarios(
    const CompetingRiskDataset& interim, const PposConfig& base,
    const ScenarioGrid& grid) {
  if (grid.size() == 0) throw ConfigError("scenario grid is empty");
  std::vector<ScenarioResult> out;
  std::size_t index = 0;
  const auto run_cell = [&](PposConfig cfg, ScenarioResult proto) {
    cfg.master_seed =
        derive_seed(base.master_seed, stream::id(stream::kScenario, index));
    ++index;
    try {
      proto.result = run_ppos(interim, cfg);
    } catch (const std::exception& e) {
      proto.failed = true;
      proto.error = e.what();
    }
    out.push_back(std::move(proto));
  };

  if (grid.axis == ScenarioGrid::Axis::prior) {
    for (double mu : grid.mus) {
      for (double sigma : grid.sigmas) {
        PposConfig cfg = base;
        cfg.models.stratified = false;
        cfg.models.arm_prior_cause1 = NormalPrior{mu, sigma};
        ScenarioResult proto;
        proto.mu = mu;
        proto.sigma = sigma;
        proto.label = "mu=" + detail::format_double(mu) +
                      ",sigma=" + detail::format_double(sigma);
        run_cell(std::move(cfg), std::move(proto));
      }
    }
  } else {
    for (double h : grid.horizons) {
      PposConfig cfg = base;
      if (cfg.censoring.mode == CensoringRule::Mode::scalar ||
          cfg.censoring.mode == CensoringRule::Mode::calendar) {
        cfg.censoring.horizon = h;
      }
      cfg.analysis.rr.eval_time = h;
      ScenarioResult proto;
      proto.horizon = h;
      proto.label = "horizon=" + detail::format_double(h);
      run_cell(std::move(cfg), std::move(proto));
    }
  }
  return out;
}

}  // namespace ppos
