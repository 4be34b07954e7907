#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ppos/hazard_models.hpp"
#include "ppos/rng.hpp"

using namespace ppos;

namespace {

CsModel weibull(double intercept, double shape, std::vector<double> coeffs = {}) {
  return WeibullCsModel{intercept, std::move(coeffs), shape};
}

CsModel pch(std::vector<double> knots, std::vector<double> levels,
            std::vector<double> coeffs = {}) {
  return PchCsModel{std::move(knots), std::move(levels), std::move(coeffs)};
}

// Fixed-grid Simpson oracle, independent of the library quadrature.
double simpson_oracle(const std::function<double(double)>& f, double a, double b,
                      int n) {
  double s = 0.0;
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    const double x0 = a + i * h;
    s += h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h));
  }
  return s;
}

}  // namespace

TEST_CASE("weibull log hazard closed forms") {
  const std::vector<double> none;
  CHECK_THAT(log_hazard(weibull(0.0, 1.0), 0.37, none),
             Catch::Matchers::WithinAbs(0.0, 1e-14));
  CHECK_THAT(log_hazard(weibull(0.0, 1.0), 12.0, none),
             Catch::Matchers::WithinAbs(0.0, 1e-14));
  CHECK_THAT(log_hazard(weibull(std::log(2.0), 1.0), 3.0, none),
             Catch::Matchers::WithinAbs(std::log(2.0), 1e-14));
  REQUIRE_THROWS_AS(log_hazard(weibull(0.0, 1.0), 0.0, none), NumericError);
}

TEST_CASE("pch log hazard interval lookup") {
  const std::vector<double> none;
  const auto m = pch({1.0}, {std::log(1.0), std::log(2.0)});
  CHECK_THAT(log_hazard(m, 1.5, none),
             Catch::Matchers::WithinAbs(std::log(2.0), 1e-14));
  // intervals are left-open right-closed
  CHECK_THAT(log_hazard(m, 1.0, none), Catch::Matchers::WithinAbs(0.0, 1e-14));
  CHECK_THAT(log_hazard(m, 0.2, none), Catch::Matchers::WithinAbs(0.0, 1e-14));
}

TEST_CASE("cumulative hazard closed forms") {
  const std::vector<double> none;
  CHECK_THAT(cum_hazard(weibull(std::log(2.0), 1.0), 0.5, none),
             Catch::Matchers::WithinAbs(1.0, 1e-14));
  CHECK_THAT(cum_hazard(pch({1.0}, {0.0, std::log(2.0)}), 1.5, none),
             Catch::Matchers::WithinAbs(2.0, 1e-14));
  CHECK(cum_hazard(weibull(1.3, 0.7), 0.0, none) == 0.0);
  CHECK(cum_hazard(pch({1.0}, {0.1, 0.2}), 0.0, none) == 0.0);
  // weibull with shape 1 reduces to the exponential u*t
  CHECK_THAT(cum_hazard(weibull(std::log(0.3), 1.0), 7.0, none),
             Catch::Matchers::WithinAbs(2.1, 1e-12));
}

TEST_CASE("cum_hazard is nondecreasing on random models") {
  Philox rng(11, 0);
  const std::vector<double> none;
  for (int rep = 0; rep < 50; ++rep) {
    CsModel m;
    if (rep % 2 == 0) {
      m = weibull(rng.uniform(-2.0, 1.0), rng.uniform(0.4, 2.5));
    } else {
      m = pch({0.5, 1.3, 2.0},
              {rng.normal(-1, 1), rng.normal(-1, 1), rng.normal(-1, 1),
               rng.normal(-1, 1)});
    }
    double prev = 0.0;
    for (double t = 0.0; t <= 5.0; t += 0.05) {
      const double h = cum_hazard(m, t, none);
      REQUIRE(h >= prev);
      prev = h;
    }
  }
}

TEST_CASE("pch cumulative hazard agrees with quadrature of its hazard") {
  Philox rng(12, 0);
  const std::vector<double> z{0.7};
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = pch({0.4, 1.1, 2.7},
                       {rng.normal(-1, 0.8), rng.normal(-1, 0.8),
                        rng.normal(-1, 0.8), rng.normal(-1, 0.8)},
                       {rng.normal(0, 0.5)});
    const double t = rng.uniform(0.1, 4.0);
    // integrate piecewise so the oracle never straddles a jump, clamping
    // evaluation points so float drift cannot cross a knot
    std::vector<double> cuts{0.0};
    for (double q : {0.4, 1.1, 2.7}) {
      if (q < t) cuts.push_back(q);
    }
    cuts.push_back(t);
    double oracle = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double hi = cuts[i + 1];
      const auto f = [&](double u) {
        return std::exp(log_hazard(m, std::min(u, hi), z));
      };
      oracle += simpson_oracle(f, cuts[i] + 1e-12, hi, 200);
    }
    CHECK_THAT(cum_hazard(m, t, z),
               Catch::Matchers::WithinRel(oracle, 1e-10));
  }
}

TEST_CASE("log likelihood closed forms and additivity") {
  DatasetSchema schema;  // no covariates
  CauseModelSet models;
  models.stratified_by_arm = false;
  models.binding.names = {};
  models.binding.resolve(schema);
  models.strata.push_back({1, -1, weibull(0.0, 1.0), {}});
  models.strata.push_back({2, -1, weibull(0.0, 1.0), {}});

  CompetingRiskDataset one;
  one.schema = schema;
  one.records.push_back({"a", 1.0, 1, 0, {}, {}});
  CHECK_THAT(log_likelihood(models, one), Catch::Matchers::WithinAbs(-2.0, 1e-13));

  CompetingRiskDataset censored = one;
  censored.records[0].event = 0;
  CHECK_THAT(log_likelihood(models, censored),
             Catch::Matchers::WithinAbs(-2.0, 1e-13));

  Philox rng(3, 0);
  CompetingRiskDataset ten;
  ten.schema = schema;
  double sum_single = 0.0;
  for (int i = 0; i < 10; ++i) {
    SubjectRecord r{"s" + std::to_string(i), rng.uniform(0.2, 3.0),
                    static_cast<int>(rng.next_u32() % 3), 0, {}, {}};
    ten.records.push_back(r);
    CompetingRiskDataset single;
    single.schema = schema;
    single.records.push_back(r);
    sum_single += log_likelihood(models, single);
  }
  CHECK_THAT(log_likelihood(models, ten),
             Catch::Matchers::WithinAbs(sum_single, 1e-10));

  // event exactly at time zero has no finite hazard for shape > 1
  CauseModelSet steep = models;
  steep.strata[0].model = weibull(0.0, 2.0);
  CompetingRiskDataset zero;
  zero.schema = schema;
  zero.records.push_back({"z", 0.0, 1, 0, {}, {}});
  REQUIRE_THROWS_WITH(log_likelihood(steep, zero),
                      Catch::Matchers::ContainsSubstring("z"));
}

TEST_CASE("log prior closed forms") {
  StratumModel sm{1, 0, weibull(0.0, 1.0), {}};
  ModelPriors priors;
  priors.intercept = NormalPrior{0.0, 20.0};
  priors.shape = ExponentialPrior{1.0};

  const double expected_alpha =
      -std::log(20.0 * std::sqrt(2.0 * 3.14159265358979323846));
  // shape=1 under Exponential(1) contributes log(1) - 1
  CHECK_THAT(log_prior(sm, priors),
             Catch::Matchers::WithinAbs(expected_alpha - 1.0, 1e-12));

  StratumModel bad = sm;
  std::get<WeibullCsModel>(bad.model).shape = -1.0;
  CHECK(log_prior(bad, priors) == kNegInf);
}

TEST_CASE("random walk prior density") {
  const std::vector<double> flat_levels(5, -2.0);
  RandomWalk1Prior rw;
  rw.first = {0.0, 20.0};
  rw.tau_hyper = {1.0};
  const double tau = 0.7;
  const double expected = log_normal_pdf(-2.0, 0.0, 20.0) +
                          4.0 * log_normal_pdf(0.0, 0.0, tau) +
                          log_exponential_pdf(tau, 1.0);
  CHECK_THAT(random_walk1_log_density(flat_levels, rw, tau),
             Catch::Matchers::WithinAbs(expected, 1e-12));
  CHECK(random_walk1_log_density(flat_levels, rw, -0.1) == kNegInf);

  StratumModel sm{1, 0, pch({1, 2, 3, 4}, std::vector<double>(5, -2.0)), 0.7};
  ModelPriors priors;
  priors.levels_rw = rw;
  CHECK_THAT(log_prior(sm, priors), Catch::Matchers::WithinAbs(expected, 1e-12));
}

TEST_CASE("cause probability ratios") {
  BoundHazardPair pair;
  const auto m1 = weibull(0.0, 1.0);            // hazard 1
  const auto m2 = weibull(std::log(3.0), 1.0);  // hazard 3
  pair.cause1 = &m1;
  pair.cause2 = &m2;
  CHECK_THAT(cause_probability(pair, 0.9),
             Catch::Matchers::WithinAbs(0.25, 1e-14));

  const auto none = weibull(kNegInf, 1.0);  // zero hazard
  pair.cause2 = &none;
  CHECK_THAT(cause_probability(pair, 2.0), Catch::Matchers::WithinAbs(1.0, 0.0));

  const auto sym1 = weibull(0.4, 1.7);
  const auto sym2 = weibull(0.4, 1.7);
  pair.cause1 = &sym1;
  pair.cause2 = &sym2;
  CHECK_THAT(cause_probability(pair, 1.23),
             Catch::Matchers::WithinAbs(0.5, 1e-14));

  pair.cause1 = &none;
  pair.cause2 = &none;
  REQUIRE_THROWS_AS(cause_probability(pair, 1.0), NumericError);
}

TEST_CASE("cif closed forms") {
  BoundHazardPair pair;
  const auto e1 = weibull(0.0, 1.0);
  const auto e2 = weibull(0.0, 1.0);
  pair.cause1 = &e1;
  pair.cause2 = &e2;
  CHECK(cif(pair, 0.0, 1) == 0.0);
  // exponential pair rate 1 each: F1(t) = (1 - exp(-2t)) / 2
  const double oracle = (1.0 - std::exp(-2.0)) / 2.0;
  CHECK_THAT(cif(pair, 1.0, 1), Catch::Matchers::WithinAbs(oracle, 1e-9));
  CHECK_THAT(cif(pair, 1.0, 1), Catch::Matchers::WithinAbs(0.432332, 5e-7));

  // single-cause PCH reduction: F1(t) = 1 - exp(-2t)
  const auto p1 = pch({}, {std::log(2.0)});
  const auto p0 = pch({}, {kNegInf});
  pair.cause1 = &p1;
  pair.cause2 = &p0;
  CHECK_THAT(cif(pair, 0.8, 1),
             Catch::Matchers::WithinAbs(1.0 - std::exp(-1.6), 1e-12));
}

TEST_CASE("cif components sum to one") {
  Philox rng(17, 0);
  for (int rep = 0; rep < 12; ++rep) {
    const auto w1 = weibull(rng.uniform(-1.5, 0.5), rng.uniform(0.5, 2.2));
    const auto w2 = weibull(rng.uniform(-2.0, 0.0), rng.uniform(0.5, 2.2));
    const auto p1 = pch({0.5, 1.5}, {rng.normal(-1, 0.7), rng.normal(-1, 0.7),
                                     rng.normal(-1, 0.7)});
    const auto p2 = pch({0.8}, {rng.normal(-1, 0.7), rng.normal(-1, 0.7)});

    const std::vector<std::pair<const CsModel*, const CsModel*>> pairs = {
        {&w1, &w2}, {&p1, &p2}, {&w1, &p2}};
    for (const auto& [a, b] : pairs) {
      BoundHazardPair pair;
      pair.cause1 = a;
      pair.cause2 = b;
      for (double t : {0.3, 1.0, 2.4}) {
        const double f1 = cif(pair, t, 1);
        const double f2 = cif(pair, t, 2);
        const double s = event_free_survival(pair, t);
        CHECK_THAT(f1 + f2 + s, Catch::Matchers::WithinAbs(1.0, 1e-8));
      }
    }
  }
}

TEST_CASE("cif handles decreasing-hazard weibull singularities") {
  BoundHazardPair pair;
  const auto w1 = weibull(std::log(0.3), 1.2);
  const auto w2 = weibull(std::log(0.1), 0.8);
  pair.cause1 = &w1;
  pair.cause2 = &w2;
  for (double t : {0.5, 1.0, 2.0}) {
    const double f1 = cif(pair, t, 1);
    const double f2 = cif(pair, t, 2);
    const double s = event_free_survival(pair, t);
    CHECK_THAT(f1 + f2 + s, Catch::Matchers::WithinAbs(1.0, 1e-8));
    CHECK(f1 > 0.0);
    CHECK(f2 > 0.0);
  }
}
