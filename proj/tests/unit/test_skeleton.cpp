#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "csbp/errors.hpp"
#include "csbp/evolution.hpp"
#include "csbp/io.hpp"
#include "csbp/rng.hpp"
#include "csbp/skeleton.hpp"
#include "csbp/stats.hpp"
#include "csbp/verify.hpp"
#include "oracles.hpp"

using namespace csbp;

namespace {

const BranchingMechanism kSuper = BranchingMechanism::feller(1.0, 1.0);
const BranchingMechanism kSub = BranchingMechanism::feller(-1.0, 1.0);
const BranchingMechanism kE1{1.0, 0.5, LevyMeasure::exponential(1.0, 1.0)};

PathConfig coarse(double dt = 0.01) {
  PathConfig c;
  c.dt = dt;
  c.horizon = 1.0;
  return c;
}

template <class Sk>
std::vector<CoupledPath> run_many(const Sk& sk, std::size_t n, double x, const InitialLaw& init,
                                  std::uint64_t seed) {
  std::vector<CoupledPath> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, substream_id(0x33, i));
    out.push_back(sk.run(x, init, rng));
  }
  return out;
}

std::vector<double> final_lambda(const std::vector<CoupledPath>& ps) {
  std::vector<double> v;
  for (const auto& p : ps) v.push_back(p.final_lambda());
  return v;
}

}  // namespace

TEST(InitialLaw, Samples) {
  Rng rng(1, 1);
  EXPECT_EQ(sample_initial(InitialLaw::fixed(3), rng), 3);
  const int n = 100000;
  int ones = 0;
  std::vector<double> pois(n);
  for (int i = 0; i < n; ++i) {
    const auto k = sample_initial(InitialLaw::poisson_positive(1e-3), rng);
    ASSERT_GE(k, 1);
    ones += k == 1;
    pois[i] = static_cast<double>(sample_initial(InitialLaw::poisson(2.0), rng));
  }
  EXPECT_GT(ones / double(n), 0.999);
  const auto st = mean_se(pois);
  EXPECT_LE(std::abs(st.mean - 2.0), 4 * st.se);
  for (int i = 0; i < 1000; ++i) ASSERT_GE(sample_initial(InitialLaw::poisson_positive(0.7), rng), 1);
  EXPECT_THROW(InitialLaw::poisson(-1.0), DomainError);
}

TEST(InitialLaw, ConditionedPoissonMean) {
  // E[k | k >= 1] = mu / (1 - e^{-mu}); both samplers
  for (double mu : {5e-4, 0.4, 3.0}) {
    Rng rng(2, static_cast<std::uint64_t>(mu * 1e4));
    std::vector<double> v(100000);
    for (auto& k : v) k = static_cast<double>(sample_initial(InitialLaw::poisson_positive(mu), rng));
    const auto st = mean_se(v);
    EXPECT_LE(std::abs(st.mean - mu / -std::expm1(-mu)), 4 * st.se + 1e-12) << mu;
  }
}

TEST(LambdaSkeleton, EmptySkeletonIsPsiStarCsbp) {
  const LambdaSkeleton sk(kSuper, 1.0, coarse());
  const auto ps = run_many(sk, 20000, 1.0, InitialLaw::fixed(0), 21);
  for (const auto& p : ps) {
    ASSERT_EQ(p.z_max, 0);
    ASSERT_EQ(p.n_branch, 0);
  }
  const auto rep = test_marginal_laplace(
      final_lambda(ps), [](double th) { return std::exp(-oracle::u(-1, 1, th, 1.0)); },
      {0.5, 1.0, 2.0}, 0.01);
  EXPECT_TRUE(rep.passed()) << rep.text_table();
}

TEST(LambdaSkeleton, YuleGrowth) {
  const LambdaSkeleton sk(kSuper, 1.0, coarse());
  const auto ps = run_many(sk, 20000, 0.0, InitialLaw::fixed(1), 22);
  std::vector<double> z;
  for (const auto& p : ps) {
    ASSERT_EQ(p.n_death, 0);
    ASSERT_GE(p.final_z(), 1);
    z.push_back(static_cast<double>(p.final_z()));
  }
  const auto st = mean_se(z);
  EXPECT_LE(std::abs(st.mean - std::exp(1.0)), 4 * st.se);
}

TEST(LambdaSkeleton, JointLaplace) {
  const LambdaSkeleton sk(kSuper, 1.0, coarse());
  const auto ps = run_many(sk, 20000, 1.0, InitialLaw::poisson(1.0), 23);
  const double eta = 0.5, th = 0.7;
  std::vector<double> v;
  for (const auto& p : ps) v.push_back(std::exp(-eta * p.final_lambda() - th * p.final_z()));
  const auto st = mean_se(v);
  const double want = std::exp(-oracle::u(1, 1, eta + (1 - std::exp(-th)), 1.0));
  const auto a = make_assertion("joint", want, st.mean, st.se, 0.01);
  EXPECT_TRUE(a.pass) << a.z;
}

TEST(LambdaSkeleton, JumpsPoissonizationAndNoDeathAtLambdaStar) {
  const LambdaSkeleton sk(kE1, 1.0, coarse());
  const auto ps = run_many(sk, 10000, 1.0, InitialLaw::poisson(1.0), 24);
  std::vector<double> L;
  std::vector<std::int64_t> Z;
  for (const auto& p : ps) {
    ASSERT_EQ(p.n_death, 0);
    L.push_back(p.final_lambda());
    Z.push_back(p.final_z());
  }
  const auto rep = test_joint_poissonization(L, Z, 1.0, {{0.5, 0.5}, {1.0, 1.0}}, 0.01);
  EXPECT_TRUE(rep.passed()) << rep.text_table();
}

TEST(LambdaSkeleton, DeathsAboveLambdaStar) {
  const LambdaSkeleton sk(kSuper, 2.0, coarse());
  const auto ps = run_many(sk, 2000, 1.0, InitialLaw::poisson(2.0), 25);
  std::int64_t deaths = 0;
  for (const auto& p : ps) deaths += p.n_death;
  EXPECT_GT(deaths, 0);
}

TEST(LambdaSkeleton, RejectsBadLambda) {
  EXPECT_THROW(LambdaSkeleton(kSuper, 0.5, coarse()), DomainError);
  EXPECT_THROW(LambdaSkeleton(kSub, 1.0, coarse()), DomainError);
}

TEST(LambdaSkeleton, ZMovesOnlyAtBranchEvents) {
  auto cfg = coarse();
  cfg.record_path = true;
  const LambdaSkeleton sk(kE1, 1.5, cfg);
  for (std::size_t i = 0; i < 200; ++i) {
    Rng rng(26, i);
    const auto p = sk.run(1.0, InitialLaw::poisson(1.5), rng);
    std::int64_t z = p.z_initial;
    double last = -1.0;
    for (const auto& e : p.events) {
      ASSERT_GE(e.time, last);
      last = e.time;
      if (e.kind == SkeletonEvent::Kind::Branch) {
        ASSERT_NE(e.offspring, 1);
        z += e.offspring - 1;
      } else {
        ASSERT_GE(e.size, 0.0);
      }
    }
    ASSERT_EQ(z, p.final_z());
    for (double m : p.lambda_mass) ASSERT_GE(m, 0.0);
  }
}

TEST(TSkeleton, EmptySkeletonIsConditionedToDie) {
  const TSkeleton sk(kSub, 2.0, coarse());
  const auto ps = run_many(sk, 20000, 1.0, InitialLaw::fixed(0), 27);
  for (const auto& p : ps) ASSERT_EQ(p.z_max, 0);
  const auto rep = test_marginal_laplace(
      final_lambda(ps),
      [](double th) { return std::exp(-oracle::v_exponent(-1, 1, 2.0, 1.0, th)); },
      {0.5, 1.0, 2.0}, 0.01);
  EXPECT_TRUE(rep.passed()) << rep.text_table();
}

TEST(TSkeleton, FirstBranchSurvival) {
  const TSkeleton sk(kSub, 2.0, coarse());
  const auto ps = run_many(sk, 20000, 0.0, InitialLaw::fixed(1), 28);
  std::vector<double> alive;
  for (const auto& p : ps) alive.push_back(p.first_branch_time > 1.0 ? 1.0 : 0.0);
  const auto st = mean_se(alive);
  EXPECT_LE(std::abs(st.mean - oracle::gamma_survival(-1, 1, 2.0, 1.0)), 4 * st.se);
}

TEST(TSkeleton, PoissonInitialMarginal) {
  const double T = 2.0;
  const TSkeleton sk(kSub, T, coarse());
  const double uT = oracle::u_inf(-1, 1, T);
  const auto ps = run_many(sk, 20000, 1.0, InitialLaw::poisson(uT), 29);
  std::vector<double> L;
  std::vector<std::int64_t> Z;
  for (const auto& p : ps) {
    ASSERT_EQ(p.n_death, 0);
    L.push_back(p.final_lambda());
    Z.push_back(p.final_z());
  }
  const auto rep = test_marginal_laplace(
      L, [](double th) { return std::exp(-oracle::u(-1, 1, th, 1.0)); }, {0.5, 1.0, 2.0}, 0.01);
  EXPECT_TRUE(rep.passed()) << rep.text_table();
  const auto joint =
      test_joint_poissonization(L, Z, oracle::u_inf(-1, 1, T - 1.0), {{0.5, 0.5}, {1, 1}}, 0.01);
  EXPECT_TRUE(joint.passed()) << joint.text_table();
}

TEST(TSkeleton, HorizonMustPrecedeT) {
  EXPECT_THROW(TSkeleton(kSub, 1.0, coarse()), DomainError);
  const BranchingMechanism no_grey{-1.0, 0.0, LevyMeasure::atoms({{1.0, 1.0}})};
  EXPECT_THROW(TSkeleton(no_grey, 2.0, coarse()), DomainError);
}

TEST(SpineLimit, DeterministicAcrossThreadsAndShapes) {
  const std::vector<double> Ts = {2.0, 4.0};
  const auto a = spine_limit_experiment(kSub, 1.0, 1.0, Ts, 2000, coarse(), 5, 1);
  const auto b = spine_limit_experiment(kSub, 1.0, 1.0, Ts, 2000, coarse(), 5, 2);
  ASSERT_EQ(a.rows.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.rows[i].d_T, b.rows[i].d_T);
    EXPECT_EQ(a.rows[i].laplace, b.rows[i].laplace);
    EXPECT_EQ(a.rows[i].p_z0_one, b.rows[i].p_z0_one);
  }
  EXPECT_EQ(a.rows[0].paired_se_prev, 0.0);
  EXPECT_GT(a.rows[1].paired_se_prev, 0.0);
  EXPECT_GT(a.rows[1].p_z0_one, a.rows[0].p_z0_one);
  for (std::size_t j = 0; j < a.theta_grid.size(); ++j) {
    EXPECT_NEAR(a.oracle[j], oracle::laplace_immigration(-1, 1, 1.0, 1, 1.0, a.theta_grid[j]),
                1e-8);
  }
}

TEST(SpineLimit, Preconditions) {
  EXPECT_THROW(spine_limit_experiment(kSuper, 1.0, 1.0, {2.0}, 100, coarse(), 1, 1), DomainError);
  EXPECT_THROW(spine_limit_experiment(kSub, 1.0, 1.0, {1.0}, 100, coarse(), 1, 1), DomainError);
}

TEST(Skeleton, CsvRows) {
  auto cfg = coarse(0.1);
  cfg.record_path = true;
  Rng rng(1, 1);
  const auto p = simulate_lambda_skeleton(kSuper, 1.0, 1.0, InitialLaw::fixed(2), cfg, rng);
  std::ostringstream a, b;
  CsvWriter wa(a, coupled_csv_header()), wb(b, event_csv_header());
  write_coupled_rows(wa, 0, p);
  write_event_rows(wb, 0, p);
  const std::string ta = a.str(), tb = b.str();
  EXPECT_EQ(ta.substr(0, ta.find('\n')), "path_id,t,lambda_mass,z_count");
  EXPECT_EQ(tb.substr(0, tb.find('\n')), "path_id,t,kind,offspring,size");
  EXPECT_EQ(std::count(tb.begin(), tb.end(), '\n'), static_cast<long>(p.events.size() + 1));
}
