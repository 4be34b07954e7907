#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ppos/errors.hpp"
#include "ppos/hazard_models.hpp"
#include "ppos/math.hpp"
#include "ppos/rng.hpp"

namespace ppos {

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 1000;
  int n_draws = 1000;
  std::uint64_t seed = 0;
  double target_accept = 0.30;
  int cov_refresh = 25;  // warmup Cholesky refresh cadence
  double ess_min = 400.0;
  double rhat_max = 1.01;
  double init_step = 0.1;
  double init_jitter = 0.5;
};

struct ParamDiagnostics {
  double ess = 0.0;
  double rhat = 0.0;
  bool degenerate = false;
};

struct PosteriorDraws {
  std::vector<std::string> names;
  int n_chains = 0;
  int n_draws = 0;  // per chain
  std::vector<double> values;  // (n_chains*n_draws) x n_params, row-major
  std::vector<ParamDiagnostics> diagnostics;
  std::uint64_t seed = 0;

  std::size_t n_params() const { return names.size(); }
  std::size_t n_total() const {
    return static_cast<std::size_t>(n_chains) * static_cast<std::size_t>(n_draws);
  }
  double at(std::size_t row, std::size_t col) const {
    return values[row * n_params() + col];
  }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * n_params(), n_params()};
  }

  std::vector<std::string> flagged(double ess_min, double rhat_max) const {
    std::vector<std::string> bad;
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& d = diagnostics[j];
      if (d.degenerate || d.ess < ess_min || d.rhat > rhat_max) {
        bad.push_back(names[j]);
      }
    }
    return bad;
  }

  bool converged(double ess_min, double rhat_max) const {
    return flagged(ess_min, rhat_max).empty();
  }
};

namespace detail {

// Lower Cholesky with progressive diagonal jitter; falls back to the
// diagonal square root if the matrix refuses to factor.
inline bool cholesky(const std::vector<double>& a, int d,
                     std::vector<double>& chol) {
  chol.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[static_cast<std::size_t>(i) * d + j];
      for (int k = 0; k < j; ++k) {
        s -= chol[static_cast<std::size_t>(i) * d + k] *
             chol[static_cast<std::size_t>(j) * d + k];
      }
      if (i == j) {
        if (s <= 0.0) return false;
        chol[static_cast<std::size_t>(i) * d + j] = std::sqrt(s);
      } else {
        chol[static_cast<std::size_t>(i) * d + j] =
            s / chol[static_cast<std::size_t>(j) * d + j];
      }
    }
  }
  return true;
}

inline void proposal_factor(const std::vector<double>& cov, int d,
                            std::vector<double>& chol) {
  std::vector<double> work = cov;
  double jitter = 1e-12;
  for (int attempt = 0; attempt < 6; ++attempt) {
    if (cholesky(work, d, chol)) return;
    for (int i = 0; i < d; ++i) work[static_cast<std::size_t>(i) * d + i] += jitter;
    jitter *= 100.0;
  }
  chol.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) {
    const double v = cov[static_cast<std::size_t>(i) * d + i];
    chol[static_cast<std::size_t>(i) * d + i] = std::sqrt(std::max(v, 1e-12));
  }
}

}  // namespace detail

using LogDensity = std::function<double(std::span<const double>)>;

inline std::vector<ParamDiagnostics> compute_diagnostics(
    const PosteriorDraws& draws);

// Adaptive random-walk Metropolis. During warmup the proposal covariance
// tracks the running sample covariance (Haario-style) and a global scale is
// tuned toward `target_accept` by Robbins-Monro; both freeze afterwards so
// the kept draws come from a fixed Markov kernel.
inline PosteriorDraws sample_posterior(const LogDensity& target,
                                       const std::vector<double>& init,
                                       const SamplerConfig& cfg,
                                       std::vector<std::string> names = {}) {
  const int d = static_cast<int>(init.size());
  if (d == 0) throw ConfigError("sample_posterior: empty parameter vector");
  if (cfg.n_chains < 1 || cfg.n_draws < 1 || cfg.n_warmup < 0) {
    throw ConfigError("sample_posterior: invalid chain/draw configuration");
  }
  if (!std::isfinite(target(init))) {
    throw NumericError("sample_posterior: target not finite at init");
  }
  if (names.empty()) {
    for (int j = 0; j < d; ++j) names.push_back("p" + std::to_string(j));
  }

  PosteriorDraws out;
  out.names = std::move(names);
  out.n_chains = cfg.n_chains;
  out.n_draws = cfg.n_draws;
  out.seed = cfg.seed;
  out.values.assign(out.n_total() * static_cast<std::size_t>(d), 0.0);

  for (int chain = 0; chain < cfg.n_chains; ++chain) {
    Philox rng(cfg.seed, static_cast<std::uint64_t>(chain));

    // Overdispersed start, shrinking the jitter until the target is finite.
    std::vector<double> x = init;
    double jitter = cfg.init_jitter * cfg.init_step;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (int j = 0; j < d; ++j) x[j] = init[j] + jitter * rng.normal();
      if (std::isfinite(target(x))) break;
      jitter *= 0.5;
      if (attempt == 59) x = init;
    }
    double lp = target(x);

    std::vector<double> mu = x;
    std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) {
      cov[static_cast<std::size_t>(i) * d + i] = cfg.init_step * cfg.init_step;
    }
    std::vector<double> chol;
    detail::proposal_factor(cov, d, chol);
    double log_scale = 0.0;

    std::vector<double> y(d), xi(d);
    int window_accepts = 0, window_iters = 0, dead_windows = 0;
    const int total = cfg.n_warmup + cfg.n_draws;
    for (int iter = 0; iter < total; ++iter) {
      const bool warm = iter < cfg.n_warmup;
      for (int j = 0; j < d; ++j) xi[j] = rng.normal();
      const double s = std::exp(log_scale);
      for (int i = 0; i < d; ++i) {
        double step = 0.0;
        for (int j = 0; j <= i; ++j) {
          step += chol[static_cast<std::size_t>(i) * d + j] * xi[j];
        }
        y[i] = x[i] + s * step;
      }
      const double lp_y = target(y);
      const double log_u = std::log(rng.uniform01());
      const double accept_prob =
          std::isfinite(lp_y) ? std::min(1.0, std::exp(lp_y - lp)) : 0.0;
      if (log_u < lp_y - lp) {
        x = y;
        lp = lp_y;
        ++window_accepts;
      }
      ++window_iters;

      if (warm) {
        const double gamma = std::pow(iter + 10.0, -0.7);
        log_scale += gamma * (accept_prob - cfg.target_accept);
        for (int i = 0; i < d; ++i) {
          const double di = x[i] - mu[i];
          mu[i] += gamma * di;
          for (int j = 0; j <= i; ++j) {
            const double dj = x[j] - mu[j];
            const std::size_t ij = static_cast<std::size_t>(i) * d + j;
            cov[ij] += gamma * (di * dj - cov[ij]);
            cov[static_cast<std::size_t>(j) * d + i] = cov[ij];
          }
        }
        if ((iter + 1) % cfg.cov_refresh == 0) {
          detail::proposal_factor(cov, d, chol);
        }
        if (window_iters >= 100) {
          dead_windows = window_accepts == 0 ? dead_windows + 1 : 0;
          if (dead_windows >= 3) {
            throw ConvergenceError(
                "sample_posterior: all proposals rejected over repeated "
                "adaptation windows (pathological target)");
          }
          window_accepts = 0;
          window_iters = 0;
        }
      } else {
        const int k = iter - cfg.n_warmup;
        const std::size_t row =
            static_cast<std::size_t>(chain) * cfg.n_draws + k;
        std::copy(x.begin(), x.end(),
                  out.values.begin() + row * static_cast<std::size_t>(d));
      }
    }
  }

  out.diagnostics = compute_diagnostics(out);
  return out;
}

// Split R-hat and ESS per the standard multi-chain definitions: each chain is
// halved, between/within variances are combined, and the autocorrelation sum
// is truncated by Geyer's initial monotone positive sequence.
inline std::vector<ParamDiagnostics> compute_diagnostics(
    const PosteriorDraws& draws) {
  if (draws.n_chains < 2) {
    throw ConfigError("diagnostics require at least 2 chains");
  }
  if (draws.n_draws < 4) {
    // too short to split: flag everything rather than pretend to diagnose
    return std::vector<ParamDiagnostics>(draws.n_params(), {kNaN, kNaN, true});
  }
  const std::size_t d = draws.n_params();
  const int m = 2 * draws.n_chains;          // split chains
  const int n = draws.n_draws / 2;           // length per split chain
  std::vector<ParamDiagnostics> out(d);

  std::vector<std::vector<double>> seq(static_cast<std::size_t>(m));
  for (std::size_t p = 0; p < d; ++p) {
    for (int c = 0; c < draws.n_chains; ++c) {
      for (int half = 0; half < 2; ++half) {
        auto& s = seq[static_cast<std::size_t>(2 * c + half)];
        s.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          const std::size_t row = static_cast<std::size_t>(c) * draws.n_draws +
                                  static_cast<std::size_t>(half * n + i);
          s[static_cast<std::size_t>(i)] = draws.at(row, p);
        }
      }
    }

    std::vector<double> means(m), vars(m);
    for (int j = 0; j < m; ++j) {
      means[j] = mean_of(seq[j]);
      vars[j] = sample_variance(seq[j]);
    }
    const double w = mean_of(vars);
    const double grand = mean_of(means);
    double b = 0.0;
    for (int j = 0; j < m; ++j) b += (means[j] - grand) * (means[j] - grand);
    b *= static_cast<double>(n) / (m - 1.0);

    if (!(w > 0.0)) {
      out[p] = {kNaN, kNaN, true};
      continue;
    }
    const double var_plus = (n - 1.0) / n * w + b / n;
    const double rhat = std::sqrt(var_plus / w);

    // Combined autocorrelations: rho_t = 1 - (W - mean_j c_{j,t}) / var_plus,
    // with c_{j,t} the lag-t autocovariance (divisor n) of split chain j.
    const int max_lag = n - 1;
    std::vector<double> rho(static_cast<std::size_t>(max_lag) + 1);
    std::vector<double> centered;
    std::vector<std::vector<double>> cent(m);
    for (int j = 0; j < m; ++j) {
      cent[j].resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) cent[j][i] = seq[j][i] - means[j];
    }
    const auto autocov = [&](int j, int t) {
      double s = 0.0;
      for (int i = 0; i + t < n; ++i) s += cent[j][i] * cent[j][i + t];
      return s / n;
    };
    for (int t = 0; t <= max_lag; ++t) {
      double c = 0.0;
      for (int j = 0; j < m; ++j) c += autocov(j, t);
      c /= m;
      rho[static_cast<std::size_t>(t)] = 1.0 - (w - c) / var_plus;
    }

    double tau = 0.0;
    double prev_pair = kInf;
    for (int k = 0; 2 * k + 1 <= max_lag; ++k) {
      double pair = rho[static_cast<std::size_t>(2 * k)] +
                    rho[static_cast<std::size_t>(2 * k + 1)];
      if (pair <= 0.0) break;
      pair = std::min(pair, prev_pair);
      prev_pair = pair;
      tau += 2.0 * pair;
    }
    tau = std::max(tau - 1.0, 1.0 / std::numeric_limits<double>::max());
    const double total = static_cast<double>(m) * n;
    out[p].ess = std::min(total / tau, total);
    out[p].rhat = rhat;
    out[p].degenerate = false;
  }
  return out;
}

inline BetaPrior beta_conjugate_update(const BetaPrior& prior, int successes,
                                       int trials) {
  if (successes < 0 || trials < 0 || successes > trials) {
    throw ConfigError("beta_conjugate_update: need 0 <= successes <= trials");
  }
  return {prior.a + successes, prior.b + (trials - successes)};
}

}  // namespace ppos
