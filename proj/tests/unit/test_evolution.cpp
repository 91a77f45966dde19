#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "csbp/errors.hpp"
#include "csbp/evolution.hpp"
#include "csbp/mechanism.hpp"
#include "oracles.hpp"

using namespace csbp;

namespace {

const BranchingMechanism kSuper = BranchingMechanism::feller(1.0, 1.0);
const BranchingMechanism kSub = BranchingMechanism::feller(-1.0, 1.0);
const BranchingMechanism kE1{1.0, 0.5, LevyMeasure::exponential(1.0, 1.0)};
const BranchingMechanism kExpSub{-1.0, 0.5, LevyMeasure::exponential(1.0, 1.0)};
const BranchingMechanism kStable{-0.5, 0.0, LevyMeasure::stable_tail(1.0, 1.5)};

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST(SolveU, LogisticClosedForm) {
  EXPECT_NEAR(u_at(kSuper, 0.5, 1.0), oracle::u(1, 1, 0.5, 1.0), 1e-9);
  EXPECT_NEAR(u_at(kSuper, 0.5, 1.0), 0.731059, 1e-6);
  for (double th : {0.1, 1.0, 3.0, 50.0}) {
    for (double t : {0.01, 0.5, 2.0, 7.0}) {
      EXPECT_LT(rel(u_at(kSub, th, t), oracle::u(-1, 1, th, t)), 1e-9);
      EXPECT_LT(rel(u_at(kSuper, th, t), oracle::u(1, 1, th, t)), 1e-9);
    }
  }
}

TEST(SolveU, FixedPoints) {
  const auto z = solve_u(kSuper, 0.0, {0.0, 1.0, 5.0});
  for (double v : z.u) EXPECT_EQ(v, 0.0);
  const auto one = solve_u(kSuper, 1.0, {0.0, 0.5, 3.0, 10.0});
  for (double v : one.u) EXPECT_NEAR(v, 1.0, 1e-10);
  const double ls = lambda_star(kE1);
  for (double t : {1.0, 4.0}) EXPECT_NEAR(u_at(kE1, ls, t), ls, 1e-10);
}

TEST(SolveU, MonotoneTowardsLambdaStar) {
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(0.1 * i);
  for (const auto& [m, th, down] :
       std::vector<std::tuple<BranchingMechanism, double, bool>>{
           {kSub, 2.0, true}, {kExpSub, 0.3, true}, {kSuper, 3.0, true},
           {kSuper, 0.2, false}, {kE1, 0.4, false}, {kStable, 5.0, true}}) {
    const auto tab = solve_u(m, th, grid);
    for (std::size_t i = 1; i < tab.u.size(); ++i) {
      EXPECT_GT(tab.u[i], 0.0);
      if (down) EXPECT_LE(tab.u[i], tab.u[i - 1]);
      else EXPECT_GE(tab.u[i], tab.u[i - 1]);
    }
  }
}

TEST(SolveU, RejectsBadGrid) {
  EXPECT_THROW(solve_u(kSub, -1.0, {0.0, 1.0}), DomainError);
  EXPECT_THROW(solve_u(kSub, 1.0, {0.0, 2.0, 1.0}), DomainError);
}

TEST(SolveU, CsvHasHeader) {
  std::ostringstream os;
  solve_u(kSub, 1.0, {0.0, 1.0}).write_csv(os, true);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,u,du_dtheta");
}

TEST(Semigroup, FlowProperty) {
  for (const auto& m : {kSub, kSuper, kE1, kExpSub, kStable}) {
    for (double th : {0.3, 2.0, 10.0}) {
      for (auto [s, t] : std::vector<std::pair<double, double>>{{0.5, 0.5}, {0.2, 1.3}, {2.0, 1.0}}) {
        const double lhs = u_at(m, th, t + s);
        const double rhs = u_at(m, u_at(m, th, s), t);
        EXPECT_LT(rel(lhs, rhs), 1e-8) << m.describe();
      }
    }
  }
}

TEST(UInfinity, ClosedForms) {
  EXPECT_NEAR(u_infinity(kSuper, 1.0), 1.0 / (1.0 - std::exp(-1.0)), 1e-8);
  EXPECT_NEAR(u_infinity(kSub, 1.0), 1.0 / (std::exp(1.0) - 1.0), 1e-8);
  EXPECT_NEAR(u_infinity(kSuper, 40.0), 1.0, 1e-10);
  for (double t : {0.01, 0.3, 2.0, 10.0}) {
    EXPECT_LT(rel(u_infinity(kSub, t), oracle::u_inf(-1, 1, t)), 1e-8);
    EXPECT_LT(rel(u_infinity(BranchingMechanism::feller(0.0, 2.0), t), oracle::u_inf(0, 2, t)),
              1e-8);
  }
}

TEST(UInfinity, SemigroupWithJumps) {
  // u_s(u_t(inf)) = u_{t+s}(inf)
  for (const auto& m : {kE1, kExpSub, kStable}) {
    EXPECT_LT(rel(u_at(m, u_infinity(m, 0.7), 0.6), u_infinity(m, 1.3)), 1e-7) << m.describe();
  }
}

TEST(UInfinity, RequiresGreyAndPositiveTime) {
  const BranchingMechanism no_grey{-1.0, 0.0, LevyMeasure::atoms({{1.0, 1.0}})};
  EXPECT_THROW(u_infinity(no_grey, 1.0), DomainError);
  EXPECT_THROW(u_infinity(kSub, 0.0), DomainError);
}

TEST(VExponent, SpecValuesAndZero) {
  EXPECT_NEAR(v_exponent(kSub, 2.0, 1.0, 1.0), oracle::v_exponent(-1, 1, 2.0, 1.0, 1.0), 1e-8);
  EXPECT_NEAR(v_exponent(kSub, 40.0, 1.0, 1.0), oracle::u(-1, 1, 1.0, 1.0), 1e-6);
  for (const auto& m : {kSub, kSuper, kE1, kStable}) {
    for (auto [T, t] : std::vector<std::pair<double, double>>{{2, 1}, {1, 0.1}, {5, 4.5}}) {
      EXPECT_NEAR(v_exponent(m, T, t, 0.0), 0.0, 1e-9) << m.describe();
    }
  }
  EXPECT_THROW(v_exponent(kSub, 1.0, 1.0, 1.0), DomainError);
}

TEST(DuDtheta, ClosedFormsAndFiniteDifference) {
  EXPECT_NEAR(du_dtheta(kSub, 1.0, 0.0), 1.0, 1e-14);
  EXPECT_LT(rel(du_dtheta(kSub, 1.0, 1.0), oracle::du_dtheta(-1, 1, 1.0, 1.0)), 1e-8);
  EXPECT_LT(rel(du_dtheta(kSuper, 1.0, 1.0), std::exp(-1.0)), 1e-8);
  for (const auto& m : {kE1, kExpSub, kStable}) {
    for (double th : {0.5, 2.0}) {
      const double h = 1e-5 * th;
      const double fd = (u_at(m, th + h, 1.0) - u_at(m, th - h, 1.0)) / (2 * h);
      EXPECT_LT(rel(du_dtheta(m, th, 1.0), fd), 1e-5) << m.describe();
    }
  }
}

TEST(Laplace, CsbpValues) {
  EXPECT_EQ(laplace_csbp(kSuper, 0.0, 1.0, 1.0), 1.0);
  EXPECT_NEAR(laplace_csbp(kSuper, 1.0, 1.0, 1.0), std::exp(-1.0), 1e-10);
  EXPECT_NEAR(laplace_csbp(kSub, 2.0, 1.0, 1.0), std::exp(-2 * oracle::u(-1, 1, 1, 1)), 1e-10);
  // log-space for large x
  EXPECT_NEAR(log_laplace_csbp(kSub, 1000.0, 1.0, 1.0), -1000 * oracle::u(-1, 1, 1, 1), 1e-6);
}

TEST(Laplace, ImmigrationValues) {
  EXPECT_NEAR(laplace_immigration(kSub, 1.0, 0, 1.0, 1.0), laplace_csbp(kSub, 1.0, 1.0, 1.0),
              1e-14);
  EXPECT_NEAR(laplace_immigration(kSub, 1.0, 1, 1.0, 1.0),
              oracle::laplace_immigration(-1, 1, 1.0, 1, 1.0, 1.0), 1e-9);
  EXPECT_NEAR(laplace_immigration(kSub, 0.0, 1, 1.0, 1e-9), 1.0, 1e-8);
  EXPECT_NEAR(laplace_immigration(kSub, 0.5, 3, 2.0, 0.7),
              oracle::laplace_immigration(-1, 1, 0.5, 3, 2.0, 0.7), 1e-9);
}

TEST(Laplace, SpineOracleTwoDerivations) {
  // e^{-alpha t} du/dtheta e^{-x u} equals the immigration formula with n = 1.
  for (const auto& m : {kSub, kExpSub, kStable}) {
    for (double th : {0.5, 1.0, 2.0}) {
      for (double t : {0.5, 1.0, 3.0}) {
        const double lhs = std::exp(-m.alpha() * t) * du_dtheta(m, th, t) *
                           laplace_csbp(m, 1.0, t, th);
        const double rhs = laplace_immigration(m, 1.0, 1, t, th);
        EXPECT_LT(rel(lhs, rhs), 1e-7) << m.describe();
      }
    }
  }
}

TEST(Laplace, DieByT) {
  EXPECT_EQ(laplace_die_by_T(kSub, 2.0, 1.0, 1.0, 0.0), 1.0);
  EXPECT_NEAR(laplace_die_by_T(kSub, 2.0, 1.0, 1.0, 1.0),
              std::exp(-oracle::v_exponent(-1, 1, 2.0, 1.0, 1.0)), 1e-9);
  EXPECT_NEAR(laplace_die_by_T(kSub, 40.0, 1.0, 1.0, 1.0), laplace_csbp(kSub, 1.0, 1.0, 1.0),
              1e-7);
}

TEST(GammaSurvival, Values) {
  EXPECT_NEAR(gamma_T_survival(kSub, 2.0, 0.0), 1.0, 1e-12);
  EXPECT_NEAR(gamma_T_survival(kSub, 2.0, 1.0), oracle::gamma_survival(-1, 1, 2.0, 1.0), 1e-9);
  EXPECT_NEAR(gamma_T_survival(kSub, 40.0, 1.0), 1.0, 1e-9);
  EXPECT_NEAR(gamma_T_survival(kSuper, 3.0, 1.5), oracle::gamma_survival(1, 1, 3.0, 1.5), 1e-9);
}

TEST(Schedule, FellerRatesAndOffspring) {
  const auto g = horizon_grid(2.0, 1.0, 0.01);
  EXPECT_FALSE(g.truncated);
  for (const auto& [m, a] : std::vector<std::pair<BranchingMechanism, double>>{{kSub, -1}, {kSuper, 1}}) {
    const auto sch = time_schedule(m, 2.0, g);
    // T - s = 1 at the last node
    EXPECT_NEAR(sch.s().back(), 1.0, 1e-12);
    EXPECT_NEAR(sch.rate().back(), oracle::u_inf(a, 1, 1.0), 1e-8);
    for (std::size_t i = 0; i < sch.s().size(); ++i) {
      EXPECT_EQ(sch.probs()[i][0], 0.0);
      EXPECT_EQ(sch.probs()[i][1], 0.0);
      EXPECT_NEAR(sch.probs()[i][2], 1.0, 1e-12);
      for (std::size_t k = 3; k < sch.probs()[i].size(); ++k) EXPECT_EQ(sch.probs()[i][k], 0.0);
      if (i > 0) EXPECT_GT(sch.rate()[i], sch.rate()[i - 1]);
    }
  }
}

TEST(Schedule, JumpMechanismSumsToOneAndExplodes) {
  const auto g = horizon_grid(1.0, 1.0, 0.01);
  EXPECT_TRUE(g.truncated);
  const auto sch = time_schedule(kExpSub, 1.0, g, 256);
  for (std::size_t i = 0; i < sch.s().size(); ++i) {
    double sum = sch.tail()[i];
    for (double p : sch.probs()[i]) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-10);
    EXPECT_EQ(sch.probs()[i][0], 0.0);
    EXPECT_EQ(sch.probs()[i][1], 0.0);
  }
  // rate near the horizon dwarfs the rate one unit away from it
  for (const auto& m : {kSub, kSuper}) {
    const auto near = time_schedule(m, 1.0, horizon_grid(1.0, 1.0 - 1e-3, 0.01));
    EXPECT_GT(near.rate().back(), 10 * near.rate().front());
  }
}

TEST(Schedule, InterpolatesBetweenNodes) {
  const auto sch = time_schedule(kSub, 2.0, horizon_grid(2.0, 1.0, 0.05));
  for (double s : {0.013, 0.5, 0.977}) {
    EXPECT_LT(rel(sch.u_at(s), oracle::u_inf(-1, 1, 2.0 - s)), 1e-6);
  }
}
