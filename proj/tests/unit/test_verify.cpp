#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "csbp/errors.hpp"
#include "csbp/evolution.hpp"
#include "csbp/rng.hpp"
#include "csbp/simulate.hpp"
#include "csbp/stats.hpp"
#include "csbp/verify.hpp"

using namespace csbp;

namespace {
const BranchingMechanism kSuper = BranchingMechanism::feller(1.0, 1.0);
const BranchingMechanism kSub = BranchingMechanism::feller(-1.0, 1.0);
const BranchingMechanism kE1{1.0, 0.5, LevyMeasure::exponential(1.0, 1.0)};
}  // namespace

TEST(Assertion, VerdictRule) {
  auto a = make_assertion("s", 1.0, 1.3, 0.05, 0.025);
  EXPECT_NEAR(a.z, 4.0, 1e-12);
  EXPECT_TRUE(a.pass);
  a = make_assertion("s", 1.0, 1.31, 0.05, 0.025);
  EXPECT_FALSE(a.pass);
  a = make_assertion("s", 1.0, 1.0, 0.0, 0.0);
  EXPECT_EQ(a.z, 0.0);
  EXPECT_TRUE(a.pass);
  // tolerance scales with max(1, |oracle|)
  EXPECT_FALSE(make_identity("i", 100.0, 100.0 + 1e-7, 1e-10).pass);
  EXPECT_TRUE(make_identity("i", 100.0, 100.0 + 1e-7, 1e-9).pass);
  EXPECT_FALSE(make_identity("i", 0.01, 0.01 + 2e-10, 1e-10).pass);
}

TEST(Analytic, ThinningExamples) {
  EXPECT_TRUE(check_thinning_identity(kSuper, {0.0, 1.0, 2.0, 5.0}).passed());
  const auto r = check_thinning_identity(kE1, {1.0});
  ASSERT_EQ(r.assertions.size(), 1u);
  EXPECT_NEAR(r.assertions[0].oracle, 0.75, 1e-10);
  EXPECT_TRUE(r.passed());
}

TEST(Analytic, PdeCoefficients) {
  const std::vector<std::pair<double, double>> grid = {{0, 0}, {0.5, 0.7}, {1, 1}, {3, 0.2}};
  EXPECT_TRUE(check_pde_coefficients(kSuper, 1.0, grid).passed());
  EXPECT_TRUE(check_pde_coefficients(kE1, 1.0, grid).passed());
  EXPECT_TRUE(check_pde_coefficients(kE1, 2.5, grid).passed());
  // Feller closed form at (0.5, 0.7): -psi(kappa) on the left.
  const double kappa = 0.5 + (1 - std::exp(-0.7));
  const auto c = pde_coefficients(kSuper, 1.0, 0.5, 0.7);
  EXPECT_NEAR(c.A + std::exp(-0.7) * c.B, -psi(kSuper, kappa), 1e-12);
  const auto z = pde_coefficients(kE1, 1.0, 0.0, 0.0);
  EXPECT_NEAR(z.A + z.B, 0.0, 1e-12);
}

TEST(Analytic, EsscherSemigroupGeneratingSpine) {
  EXPECT_TRUE(check_esscher(kE1, 1.0, 0.5, {0.0, 1.0, 4.0}).passed());
  EXPECT_TRUE(check_semigroup(kE1, {0.5, 2.0}, {{0.5, 0.5}, {1.0, 2.0}}).passed());
  EXPECT_TRUE(check_generating_function(kE1, 1.0, {0.0, 0.3, 0.7, 1.0}).passed());
  EXPECT_TRUE(check_spine_oracle(kSub, 1.0, {0.5, 1.0}, {0.5, 1.0}).passed());
  EXPECT_THROW(check_spine_oracle(kSuper, 1.0, {1.0}, {1.0}), DomainError);
}

TEST(MonteCarlo, DegenerateSampleAndOffsetOracle) {
  const std::vector<double> zeros(1000, 0.0);
  const auto r = test_marginal_laplace(zeros, [](double) { return 1.0; }, {1.0}, 0.0);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.assertions[0].z, 0.0);
  EXPECT_FALSE(r.flags.empty());

  std::vector<double> xs(100000);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Rng rng(3, i);
    xs[i] = sample_feller_exact(kSuper, 1.0, 1.0, rng);
  }
  const auto good = test_marginal_laplace(
      xs, [](double th) { return laplace_csbp(kSuper, 1.0, 1.0, th); }, {0.5, 1.0, 2.0}, 0.0);
  EXPECT_TRUE(good.passed()) << good.text_table();
  for (const auto& a : good.assertions) {
    const double off = a.oracle + 10 * a.se;
    const auto bad = test_marginal_laplace(xs, [&](double) { return off; }, {1.0}, 0.0);
    EXPECT_FALSE(bad.passed());
  }
}

TEST(MonteCarlo, JointAtThetaZeroIsExact) {
  std::vector<double> L = {0.1, 1.0, 2.0, 0.5};
  std::vector<std::int64_t> Z = {0, 3, 1, 2};
  L.resize(1000, 0.7);
  Z.resize(1000, 1);
  const auto r = test_joint_poissonization(L, Z, 1.0, {{0.5, 0.0}}, 0.0);
  ASSERT_EQ(r.assertions.size(), 1u);
  EXPECT_EQ(r.assertions[0].z, 0.0);
}

TEST(MonteCarlo, DispersionRejectsOverdispersedCounts) {
  std::vector<double> L(20000);
  std::vector<std::int64_t> Zp(20000), Zg(20000);
  for (std::size_t i = 0; i < L.size(); ++i) {
    Rng rng(4, i);
    L[i] = rng.exponential(1.0) * 2;
    Zp[i] = rng.poisson(L[i]);
    Zg[i] = rng.poisson(rng.gamma(1.0, 1.0 / L[i]));  // geometric mixture, mean L
  }
  EXPECT_TRUE(test_poisson_dispersion(L, Zp, 1.0, 0.0).passed());
  EXPECT_FALSE(test_poisson_dispersion(L, Zg, 1.0, 0.0).passed());
}

TEST(MonteCarlo, MeanGrowthExamples) {
  std::vector<double> xs(100000);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Rng rng(5, i);
    xs[i] = sample_feller_exact(kSub, 1.0, 1.0, rng);
  }
  const auto r = test_mean_growth(xs, 1.0, kSub, 1.0, 0.0);
  EXPECT_NEAR(r.assertions[0].oracle, std::exp(-1.0), 1e-14);
  EXPECT_TRUE(r.passed());
  const std::vector<double> crit(1000, 2.0);
  const auto c = test_mean_growth(crit, 2.0, BranchingMechanism::feller(0.0, 1.0), 3.0, 0.0);
  EXPECT_NEAR(c.assertions[0].oracle, 2.0, 1e-14);
}

TEST(MonteCarlo, ExtinctionOracles) {
  const std::vector<double> all(1000, 1.0);
  const auto r0 = test_extinction(all, kSuper, 0.0, 40.0, 0.0);
  EXPECT_NEAR(r0.assertions[0].oracle, 1.0, 1e-14);
  EXPECT_TRUE(r0.passed());
  std::vector<double> some(1000, 0.0);
  for (int i = 0; i < 50; ++i) some[i] = 1.0;
  const auto r3 = test_extinction(some, kSuper, 3.0, 40.0, 0.0);
  EXPECT_NEAR(r3.assertions[0].oracle, std::exp(-3.0), 1e-12);
}

TEST(Reports, JsonIsDeterministicAndNullsNonFinite) {
  VerificationReport r("x");
  r.inputs["seed"] = 1;
  r.add(make_assertion("a", 1.0, std::nan(""), 0.1, 0.0));
  const auto j = r.to_json();
  EXPECT_EQ(j.dump(), r.to_json().dump());
  EXPECT_TRUE(j["assertions"][0]["estimate"].is_null());
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(r.inputs_digest().size(), 16u);
}

TEST(Suites, IdentitiesPassSelftestFails) {
  SuiteConfig cfg;
  const auto ids = run_suite("identities", cfg);
  EXPECT_TRUE(ids.passed()) << ids.text_table();
  cfg.mechanism = kE1;
  EXPECT_TRUE(run_suite("identities", cfg).passed());
  SuiteConfig st;
  EXPECT_FALSE(run_suite("selftest", st).passed());
}

TEST(Suites, ConfigErrors) {
  SuiteConfig cfg;
  EXPECT_THROW(run_suite("nope", cfg), ConfigError);
  cfg.N = 10;
  EXPECT_THROW(run_suite("exact", cfg), ConfigError);
  SuiteConfig m;
  m.mechanism = kE1;
  EXPECT_THROW(run_suite("exact", m), ConfigError);
}

TEST(Suites, ThreadCountDoesNotChangeReport) {
  SuiteConfig a;
  a.N = 5000;
  a.threads = 1;
  SuiteConfig b = a;
  b.threads = 3;
  EXPECT_EQ(run_suite("exact", a).to_json().dump(), run_suite("exact", b).to_json().dump());
}
