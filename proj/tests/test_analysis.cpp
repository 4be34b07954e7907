#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "ppos/analysis.hpp"
#include "ppos/rng.hpp"
#include "ppos/synthetic.hpp"

using namespace ppos;

namespace {

CompetingRiskDataset from_obs(const std::vector<std::pair<double, int>>& obs) {
  CompetingRiskDataset ds;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    ds.records.push_back({"s" + std::to_string(i), obs[i].first, obs[i].second,
                          0, {}, {}});
  }
  return ds;
}

// hand product-limit computation, kept independent of the library code
struct OracleCurve {
  std::vector<double> times, f1, f2, surv;
};

OracleCurve aj_hand(std::vector<std::pair<double, int>> obs) {
  std::sort(obs.begin(), obs.end());
  OracleCurve out;
  double s = 1.0, f1 = 0.0, f2 = 0.0;
  std::size_t i = 0;
  while (i < obs.size()) {
    const double t = obs[i].first;
    double n = 0.0;
    for (const auto& o : obs) n += o.first >= t;
    double d1 = 0.0, d2 = 0.0;
    while (i < obs.size() && obs[i].first == t) {
      d1 += obs[i].second == 1;
      d2 += obs[i].second == 2;
      ++i;
    }
    if (d1 + d2 > 0.0) {
      f1 += s * d1 / n;
      f2 += s * d2 / n;
      s *= 1.0 - (d1 + d2) / n;
      out.times.push_back(t);
      out.f1.push_back(f1);
      out.f2.push_back(f2);
      out.surv.push_back(s);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("aalen-johansen four-subject hand example") {
  const auto ds = from_obs({{1.0, 1}, {2.0, 2}, {3.0, 0}, {4.0, 1}});
  const auto est = aalen_johansen(ds);
  REQUIRE(est.times == std::vector<double>{1.0, 2.0, 4.0});
  CHECK_THAT(est.cif_at(1.0, 1), Catch::Matchers::WithinAbs(0.25, 1e-14));
  CHECK_THAT(est.cif_at(2.0, 2), Catch::Matchers::WithinAbs(0.25, 1e-14));
  CHECK_THAT(est.cif_at(4.0, 1), Catch::Matchers::WithinAbs(0.75, 1e-14));
  CHECK_THAT(est.cif_at(4.0, 1) + est.cif_at(4.0, 2),
             Catch::Matchers::WithinAbs(1.0, 1e-14));
  CHECK(est.surv_at(4.0) == 0.0);
  // before the first event nothing has happened
  CHECK(est.cif_at(0.5, 1) == 0.0);
  CHECK(est.surv_at(0.5) == 1.0);
}

TEST_CASE("no cause-1 events means a flat zero curve") {
  const auto ds = from_obs({{1.0, 2}, {2.0, 0}, {3.0, 2}});
  const auto est = aalen_johansen(ds);
  for (double v : est.cif1) CHECK(v == 0.0);
}

TEST_CASE("single cause without censoring reduces to the empirical cdf") {
  const auto ds = from_obs({{1.0, 1}, {2.0, 1}, {3.0, 1}, {4.0, 1}, {5.0, 1}});
  const auto est = aalen_johansen(ds);
  for (std::size_t j = 0; j < est.times.size(); ++j) {
    CHECK_THAT(est.cif1[j],
               Catch::Matchers::WithinAbs((j + 1) / 5.0, 1e-14));
    CHECK_THAT(1.0 - est.surv[j],
               Catch::Matchers::WithinAbs((j + 1) / 5.0, 1e-14));
  }
}

TEST_CASE("aalen-johansen matches the hand oracle on every small dataset") {
  // every event/censor combination for n = 1..5 subjects at times 1..n
  for (int n = 1; n <= 5; ++n) {
    const int combos = static_cast<int>(std::pow(3, n));
    for (int code = 0; code < combos; ++code) {
      std::vector<std::pair<double, int>> obs;
      int c = code;
      for (int i = 0; i < n; ++i) {
        obs.emplace_back(static_cast<double>(i + 1), c % 3);
        c /= 3;
      }
      const auto oracle = aj_hand(obs);
      const auto est = aalen_johansen(from_obs(obs));
      REQUIRE(est.times == oracle.times);
      for (std::size_t j = 0; j < oracle.times.size(); ++j) {
        CHECK_THAT(est.cif1[j], Catch::Matchers::WithinAbs(oracle.f1[j], 1e-12));
        CHECK_THAT(est.cif2[j], Catch::Matchers::WithinAbs(oracle.f2[j], 1e-12));
        CHECK_THAT(est.surv[j], Catch::Matchers::WithinAbs(oracle.surv[j], 1e-12));
        CHECK_THAT(est.cif1[j] + est.cif2[j] + est.surv[j],
                   Catch::Matchers::WithinAbs(1.0, 1e-12));
        CHECK(est.var1[j] >= 0.0);
        CHECK(est.var2[j] >= 0.0);
      }
    }
  }
}

TEST_CASE("tied event and censoring times share the at-risk set") {
  // two events of different causes and one censoring, all at t = 2
  const auto ds = from_obs({{1.0, 1}, {2.0, 1}, {2.0, 2}, {2.0, 0}, {3.0, 1}});
  const auto est = aalen_johansen(ds);
  REQUIRE(est.times == std::vector<double>{1.0, 2.0, 3.0});
  // at t=2: n=4 at risk, one event of each cause
  CHECK_THAT(est.cif_at(2.0, 1),
             Catch::Matchers::WithinAbs(0.2 + 0.8 / 4.0, 1e-14));
  CHECK_THAT(est.cif_at(2.0, 2), Catch::Matchers::WithinAbs(0.8 / 4.0, 1e-14));
  // survivors: S = 0.8 * (1 - 2/4) = 0.4, then the last one fails
  CHECK_THAT(est.surv_at(2.0), Catch::Matchers::WithinAbs(0.4, 1e-14));
  CHECK_THAT(est.surv_at(3.0), Catch::Matchers::WithinAbs(0.0, 1e-14));
}

TEST_CASE("risk ratio closed forms") {
  // interim-analysis style magnitudes: risks per 10,000
  const auto res =
      risk_ratio_from_estimates(8.6e-4, 1e-8, 13.2e-4, 2e-8, 6.5, 0.02);
  CHECK_THAT(res.rr, Catch::Matchers::WithinAbs(0.6515, 2e-4));
  CHECK_FALSE(res.degenerate);

  const auto null_res = risk_ratio_from_estimates(0.2, 1e-4, 0.2, 1e-4, 1.0, 0.05);
  CHECK_THAT(null_res.p_value, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_FALSE(null_res.success);

  // log RR = -0.4155 with ASE 0.2023 gives p near 0.040
  const double f_r = 0.1;
  const double f_e = f_r * std::exp(-0.4155);
  const double ase = 0.2023;
  // choose variances reproducing the ASE: all on the exposed side
  const double var_e = ase * ase * f_e * f_e;
  const auto res2 = risk_ratio_from_estimates(f_e, var_e, f_r, 0.0, 6.5, 0.035);
  CHECK_THAT(res2.log_rr, Catch::Matchers::WithinAbs(-0.4155, 1e-12));
  CHECK_THAT(res2.ase_log_rr, Catch::Matchers::WithinAbs(0.2023, 1e-12));
  CHECK_THAT(res2.p_value, Catch::Matchers::WithinAbs(0.040, 2e-4));

  // zero CIF in either group is degenerate and never a success
  const auto degen = risk_ratio_from_estimates(0.0, 0.0, 0.1, 1e-4, 1.0, 0.05);
  CHECK(degen.degenerate);
  CHECK_FALSE(degen.success);
}

TEST_CASE("risk ratio test reads curves at the evaluation time") {
  const auto exposed = aalen_johansen(from_obs({{1.0, 1}, {2.0, 0}, {3.0, 0}, {4.0, 0}}));
  const auto referent = aalen_johansen(
      from_obs({{1.0, 1}, {1.5, 1}, {2.5, 0}, {3.5, 0}}));
  const auto res = risk_ratio_test(exposed, referent, 2.0, 0.05);
  CHECK_THAT(res.rr, Catch::Matchers::WithinAbs(0.25 / 0.5, 1e-12));
  CHECK(res.p_value > 0.05);
}

TEST_CASE("decision rules compare inclusively and conjoin") {
  DecisionRule posterior_rule;
  posterior_rule.criteria = {
      {"posterior_prob", DecisionCriterion::Kind::at_least, 0.975}};
  CHECK(evaluate_rule({{"posterior_prob", 0.975}}, posterior_rule));
  CHECK_FALSE(evaluate_rule({{"posterior_prob", 0.9749}}, posterior_rule));

  DecisionRule p_rule;
  p_rule.criteria = {{"p_value", DecisionCriterion::Kind::at_most, 0.035}};
  CHECK(evaluate_rule({{"p_value", 0.035}}, p_rule));
  CHECK_FALSE(evaluate_rule({{"p_value", 0.0351}}, p_rule));

  DecisionRule both;
  both.criteria = {{"posterior_prob", DecisionCriterion::Kind::at_least, 0.975},
                   {"mortality_prob", DecisionCriterion::Kind::at_least, 0.9}};
  CHECK(evaluate_rule({{"posterior_prob", 0.98}, {"mortality_prob", 0.95}}, both));
  CHECK_FALSE(
      evaluate_rule({{"posterior_prob", 0.98}, {"mortality_prob", 0.85}}, both));

  REQUIRE_THROWS_AS(evaluate_rule({{"other", 1.0}}, p_rule), ConfigError);

  // monotone: raising the statistic can only help
  Philox rng(5, 0);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.uniform01();
    const bool low = evaluate_rule({{"posterior_prob", v}}, posterior_rule);
    const bool high =
        evaluate_rule({{"posterior_prob", std::min(1.0, v + 0.3)}}, posterior_rule);
    if (low) CHECK(high);
  }
}

namespace {

CompetingRiskDataset two_arm_weibull_trial(std::uint64_t seed, double cs_hr,
                                           int n_per_arm) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.arms = {{1, n_per_arm}, {0, n_per_arm}};
  spec.truth.stratified_by_arm = true;
  spec.truth.strata.push_back({1, 0, WeibullCsModel{std::log(0.06), {}, 1.1}, {}});
  spec.truth.strata.push_back(
      {1, 1, WeibullCsModel{std::log(0.06 * cs_hr), {}, 1.1}, {}});
  spec.truth.strata.push_back({2, 0, WeibullCsModel{std::log(0.012), {}, 1.0}, {}});
  spec.truth.strata.push_back({2, 1, WeibullCsModel{std::log(0.012), {}, 1.0}, {}});
  spec.censoring.kind = SyntheticCensoring::Kind::scalar;
  spec.censoring.horizon = 60.0;
  return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("graduation probability flips under arm relabeling") {
  const auto ds = two_arm_weibull_trial(17, 1.4, 150);
  GraduationSpec spec;
  spec.sampler.seed = 11;
  spec.sampler.n_chains = 4;
  spec.sampler.n_warmup = 500;
  spec.sampler.n_draws = 500;
  const auto res = bayes_ph_graduation(ds, spec);

  CompetingRiskDataset swapped = ds;
  for (auto& r : swapped.records) r.arm = 1 - r.arm;
  const auto res_swapped = bayes_ph_graduation(swapped, spec);

  CHECK_THAT(res.posterior_prob + res_swapped.posterior_prob,
             Catch::Matchers::WithinAbs(1.0, 0.05));
  CHECK(res.converged);
}

TEST_CASE("strong simulated benefit graduates") {
  const auto ds = two_arm_weibull_trial(23, 3.0, 400);
  GraduationSpec spec;
  spec.sampler.seed = 12;
  spec.sampler.n_chains = 4;
  spec.sampler.n_warmup = 500;
  spec.sampler.n_draws = 1000;
  const auto res = bayes_ph_graduation(ds, spec);
  CHECK(res.posterior_prob > 0.975);
  CHECK(res.success);
  CHECK(res.converged);
}
