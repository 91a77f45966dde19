#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csbp/levy.hpp"

namespace csbp {

class Rng;

/// psi(theta) = -alpha theta + beta theta^2 + \int (e^{-theta r} - 1 + theta r) Pi(dr).
class BranchingMechanism {
 public:
  BranchingMechanism(double alpha, double beta, LevyMeasure levy = LevyMeasure::none());

  static BranchingMechanism feller(double alpha, double beta) { return {alpha, beta}; }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const LevyMeasure& levy() const { return levy_; }

  std::string describe() const;
  nlohmann::ordered_json to_json() const;

 private:
  double alpha_;
  double beta_;
  LevyMeasure levy_;
};

enum class Criticality { Supercritical, Critical, Subcritical };

std::string to_string(Criticality c);

double psi(const BranchingMechanism& mech, double theta);
double psi_prime(const BranchingMechanism& mech, double theta);

/// u psi'(u) - psi(u) = beta u^2 + \int (1 - e^{-u r}(1 + u r)) Pi(dr), evaluated
/// without the cancellation of the difference.
double prolific_numerator(const BranchingMechanism& mech, double u);

Criticality classify(const BranchingMechanism& mech);

/// Largest root of psi. Throws DomainError unless supercritical.
double lambda_star(const BranchingMechanism& mech);

/// psi_lambda(theta) = psi(theta + lambda) - psi(lambda).
BranchingMechanism esscher(const BranchingMechanism& mech, double lambda);

/// Whether \int^inf dxi / psi(xi) converges. Throws IndeterminateError when the
/// tail slope test cannot decide.
bool greys_condition(const BranchingMechanism& mech);

/// phi_lambda(z) = 2 beta z + \int (1 - e^{-z r}) r e^{-lambda r} Pi(dr).
double phi(const BranchingMechanism& mech, double lambda, double z);

struct OffspringLaw {
  double rate = 0.0;
  std::vector<double> probs;  // probs[k] = p_k, k = 0..K_max
  double tail_mass = 0.0;
  double lambda = 0.0;

  double total() const;
};

/// Branching rate psi'(lambda) and offspring law p_k of the lambda-skeleton.
OffspringLaw skeleton_params(const BranchingMechanism& mech, double lambda, int k_max = 64);

/// Draw k from a truncated offspring table (the tail is renormalised away).
int sample_offspring(const OffspringLaw& law, Rng& rng);

/// Size law of mass grafted onto the skeleton: along edges, or at a branch
/// point with k offspring.
struct ImmigrationLaw {
  enum class Kind { EdgeJump, BranchPoint };

  Kind kind = Kind::EdgeJump;
  int k = 0;
  double lambda = 0.0;
  double eps = 0.0;  // jumps below eps are not represented
  double beta = 0.0;
  LevyMeasure levy;  // untilted

  static ImmigrationLaw edge(const BranchingMechanism& mech, double lambda, double eps = 0.0);
  static ImmigrationLaw branch_point(const BranchingMechanism& mech, double lambda, int k,
                                     double eps = 0.0);

  /// Edge immigration events per unit time per skeleton individual.
  double rate() const;
  /// Probability that the draw is exactly 0.
  double atom_at_zero() const;
  double mean() const;
  double second_moment() const;
};

double sample_immigration(const ImmigrationLaw& law, Rng& rng);

struct BranchOutcome {
  int offspring = 0;
  double immigrant = 0.0;
};

/// Joint law of (offspring count, branch-point immigrant) at a skeleton split.
///
/// Sampling the jump size r first from (1 - e^{-u r}(1 + u r)) Pi(dr) and then
/// k ~ Poisson(u r) conditioned on k >= 2 gives P(k) = p_k and r | k ~ eta_k
/// without truncating the offspring law.
class BranchLaw {
 public:
  /// lambda-skeleton: rate psi'(lambda), p_0 = psi(lambda) / (lambda psi'(lambda)).
  static BranchLaw homogeneous(const BranchingMechanism& mech, double lambda);
  /// Horizon skeleton with u = u_{T-s}(inf): rate (u psi'(u) - psi(u)) / u, p_0 = 0.
  static BranchLaw horizon(const BranchingMechanism& mech, double u);

  double rate() const { return rate_; }
  double p_death() const { return p_death_; }
  double p_binary() const { return p_binary_; }

  BranchOutcome sample(Rng& rng) const;

 private:
  LevyMeasure levy_;
  double u_ = 0.0;
  double rate_ = 0.0;
  double p_death_ = 0.0;
  double p_binary_ = 0.0;
};

}  // namespace csbp
