#pragma once

// Euler-Maruyama increments for CSBP-type jump diffusions. Not installed.

#include <vector>

#include "csbp/levy.hpp"
#include "csbp/simulate.hpp"

namespace csbp::detail {

/// dX = a X dt + sqrt(2 beta X) dW + \int r (N - X dt mu)(dr), split at eps:
/// jumps >= eps are simulated, smaller ones are a Gaussian or dropped.
struct EulerStep {
  double drift = 0.0;      // per unit mass, after removing the big-jump compensator
  double diff_var = 0.0;   // per unit mass and time
  double tail_rate = 0.0;  // big jumps per unit mass and time
  double eps = 0.0;
  LevyMeasure jumps;       // measure the big jumps are drawn from

  /// One explicit step of length h from X > 0; the result is clamped at 0.
  double advance(double x, double h, Rng& rng, std::vector<JumpRecord>* log, double t) const;
};

EulerStep make_euler_step(double a, double beta, const LevyMeasure& mu, double eps,
                          SmallJumpMode mode, double* dropped_variance = nullptr);

/// Mass immigrating along a line of descent: drift 2 beta per unit time plus
/// jumps at rate \int_{eps}^inf r e^{-lambda r} Pi(dr) with sizes proportional
/// to r e^{-lambda r} Pi(dr).
struct LineImmigration {
  double drift = 0.0;
  double rate = 0.0;
  double lambda = 0.0;
  double eps = 0.0;
  LevyMeasure levy;  // untilted

  double sample_size(Rng& rng) const;
};

LineImmigration make_line_immigration(const BranchingMechanism& mech, double lambda,
                                      double eps, bool allow_truncation);

}  // namespace csbp::detail
