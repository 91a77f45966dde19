#include "csbp/mechanism.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "csbp/errors.hpp"
#include "csbp/rng.hpp"
#include "numerics.hpp"

namespace csbp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0)) throw DomainError(std::string(what) + " must be >= 0");
}

// Poisson(mean) conditioned on being at least 2.
int poisson_at_least_two(double mean, Rng& rng) {
  if (mean > 1.0) {
    for (;;) {
      const auto k = rng.poisson(mean);
      if (k >= 2) return static_cast<int>(k);
    }
  }
  const double norm = detail::one_minus_exp_poly1(mean);
  double pmf = std::exp(-mean) * mean * mean / 2.0;
  double target = rng.uniform() * norm;
  int k = 2;
  while (k < 10000) {
    target -= pmf;
    if (target <= 0.0) return k;
    ++k;
    pmf *= mean / k;
    if (pmf == 0.0) break;
  }
  return k;
}

}  // namespace

BranchingMechanism::BranchingMechanism(double alpha, double beta, LevyMeasure levy)
    : alpha_(alpha), beta_(beta), levy_(std::move(levy)) {
  if (!std::isfinite(alpha)) throw DomainError("mechanism: alpha must be finite");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("mechanism: beta must be >= 0");
  if (beta == 0.0 && levy_.is_none()) {
    throw DomainError("mechanism: needs beta > 0 or a non-trivial Levy measure");
  }
}

std::string BranchingMechanism::describe() const {
  std::ostringstream os;
  os.precision(10);
  os << "alpha=" << alpha_ << ", beta=" << beta_ << ", Pi=" << levy_.describe();
  return os.str();
}

nlohmann::ordered_json BranchingMechanism::to_json() const {
  return {{"alpha", alpha_}, {"beta", beta_}, {"levy", levy_.to_json()}};
}

std::string to_string(Criticality c) {
  switch (c) {
    case Criticality::Supercritical: return "Supercritical";
    case Criticality::Critical: return "Critical";
    case Criticality::Subcritical: return "Subcritical";
  }
  return "?";
}

double psi(const BranchingMechanism& mech, double theta) {
  require_nonnegative(theta, "psi: theta");
  if (theta == 0.0) return 0.0;
  return -mech.alpha() * theta + mech.beta() * theta * theta + mech.levy().psi_integral(theta);
}

double psi_prime(const BranchingMechanism& mech, double theta) {
  require_nonnegative(theta, "psi_prime: theta");
  return -mech.alpha() + 2.0 * mech.beta() * theta + mech.levy().psi_prime_integral(theta);
}

double prolific_numerator(const BranchingMechanism& mech, double u) {
  require_nonnegative(u, "prolific_numerator: u");
  return mech.beta() * u * u + mech.levy().prolific_weight(u);
}

Criticality classify(const BranchingMechanism& mech) {
  if (mech.alpha() > 0.0) return Criticality::Supercritical;
  if (mech.alpha() < 0.0) return Criticality::Subcritical;
  return Criticality::Critical;
}

double lambda_star(const BranchingMechanism& mech) {
  if (classify(mech) != Criticality::Supercritical) {
    throw DomainError("lambda_star: mechanism is not supercritical");
  }
  double hi = 1.0;
  while (psi(mech, hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("lambda_star: psi stays non-positive");
  }
  double lo = 0.0;
  while (hi - lo > 1e-13 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (psi(mech, mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 2; ++i) x -= psi(mech, x) / psi_prime(mech, x);
  if (std::abs(psi(mech, x)) > 1e-12 * std::max(1.0, psi_prime(mech, x))) {
    throw NumericalError("lambda_star: residual too large");
  }
  return x;
}

BranchingMechanism esscher(const BranchingMechanism& mech, double lambda) {
  require_nonnegative(lambda, "esscher: lambda");
  if (classify(mech) == Criticality::Supercritical) {
    const double ls = lambda_star(mech);
    if (lambda < ls * (1.0 - 1e-12)) throw DomainError("esscher: lambda below lambda*");
  }
  if (lambda == 0.0) return mech;
  return {-psi_prime(mech, lambda), mech.beta(), mech.levy().tilted(lambda)};
}

bool greys_condition(const BranchingMechanism& mech) {
  if (mech.beta() > 0.0) return true;
  // Finite first moment: psi grows at most linearly.
  if (std::isfinite(mech.levy().moment(1, 0.0, 0.0, kInf))) return false;
  constexpr double kThetaMax = 1e12;
  const double slope =
      (std::log(psi(mech, kThetaMax)) - std::log(psi(mech, kThetaMax / 10.0))) / std::log(10.0);
  if (std::abs(slope - 1.0) < 0.05) {
    throw IndeterminateError("greys_condition: tail slope " + std::to_string(slope) +
                             " too close to 1");
  }
  return slope > 1.0;
}

double phi(const BranchingMechanism& mech, double lambda, double z) {
  require_nonnegative(lambda, "phi: lambda");
  require_nonnegative(z, "phi: z");
  if (z == 0.0) return 0.0;
  return 2.0 * mech.beta() * z + mech.levy().tilted(lambda).psi_prime_integral(z);
}

double OffspringLaw::total() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

OffspringLaw skeleton_params(const BranchingMechanism& mech, double lambda, int k_max) {
  if (!(lambda > 0.0)) throw DomainError("skeleton_params: lambda must be positive");
  if (k_max < 2) throw DomainError("skeleton_params: K_max must be >= 2");
  bool at_root = false;
  if (classify(mech) == Criticality::Supercritical) {
    const double ls = lambda_star(mech);
    if (lambda < ls * (1.0 - 1e-12)) throw DomainError("skeleton_params: lambda below lambda*");
    at_root = std::abs(lambda - ls) <= 1e-12 * ls;
  }
  const double rate = psi_prime(mech, lambda);
  if (!(rate > 0.0)) throw DomainError("skeleton_params: psi'(lambda) must be positive");
  const double denom = lambda * rate;

  OffspringLaw law;
  law.rate = rate;
  law.lambda = lambda;
  law.probs.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
  law.probs[0] = at_root ? 0.0 : psi(mech, lambda) / denom;
  double jump_mass = 0.0;
  for (int k = 2; k <= k_max; ++k) {
    const double w = mech.levy().poisson_weight(k, lambda);
    jump_mass += w;
    law.probs[static_cast<std::size_t>(k)] = w / denom;
  }
  law.probs[2] += mech.beta() * lambda * lambda / denom;
  law.tail_mass = (mech.levy().prolific_weight(lambda) - jump_mass) / denom;
  if (law.tail_mass > 1e-10) {
    throw DomainError("skeleton_params: offspring tail beyond K_max is " +
                      std::to_string(law.tail_mass) + " (> 1e-10); raise K_max");
  }
  if (std::abs(law.total() + law.tail_mass - 1.0) > 1e-12) {
    throw NumericalError("skeleton_params: offspring probabilities do not sum to 1");
  }
  return law;
}

int sample_offspring(const OffspringLaw& law, Rng& rng) {
  double target = rng.uniform() * law.total();
  int last = 0;
  for (std::size_t k = 0; k < law.probs.size(); ++k) {
    if (law.probs[k] <= 0.0) continue;
    last = static_cast<int>(k);
    target -= law.probs[k];
    if (target <= 0.0) return last;
  }
  return last;
}

ImmigrationLaw ImmigrationLaw::edge(const BranchingMechanism& mech, double lambda, double eps) {
  require_nonnegative(lambda, "immigration: lambda");
  require_nonnegative(eps, "immigration: eps");
  if (mech.levy().is_none()) throw InvalidLawError("edge immigration: Pi has no jumps");
  ImmigrationLaw law;
  law.kind = Kind::EdgeJump;
  law.lambda = lambda;
  law.eps = eps;
  law.beta = mech.beta();
  law.levy = mech.levy();
  const double m = law.rate();
  if (!std::isfinite(m)) {
    throw InvalidLawError("edge immigration: infinite rate, a positive eps cutoff is required");
  }
  if (!(m > 0.0)) throw InvalidLawError("edge immigration: zero rate");
  return law;
}

ImmigrationLaw ImmigrationLaw::branch_point(const BranchingMechanism& mech, double lambda, int k,
                                            double eps) {
  require_nonnegative(lambda, "immigration: lambda");
  if (k == 1) throw InvalidLawError("branch point immigration: eta_1 has no mass");
  if (k < 0) throw InvalidLawError("branch point immigration: k must be >= 0");
  ImmigrationLaw law;
  law.kind = Kind::BranchPoint;
  law.k = k;
  law.lambda = lambda;
  law.eps = eps;
  law.beta = mech.beta();
  law.levy = mech.levy();
  if (k >= 2 && law.atom_at_zero() < 1.0 && !(law.levy.moment(k, lambda, 0.0, kInf) > 0.0)) {
    throw InvalidLawError("branch point immigration: eta_k has no mass");
  }
  if (k > 2 && law.levy.is_none()) {
    throw InvalidLawError("branch point immigration: eta_k has no mass without jumps");
  }
  return law;
}

double ImmigrationLaw::rate() const {
  if (kind != Kind::EdgeJump) return 0.0;
  return levy.moment(1, lambda, eps, kInf);
}

double ImmigrationLaw::atom_at_zero() const {
  if (kind == Kind::EdgeJump) return 0.0;
  if (k == 0 || levy.is_none()) return 1.0;
  if (k != 2) return 0.0;
  const double atom = beta * lambda * lambda;
  const double cont = levy.poisson_weight(2, lambda);
  if (atom + cont == 0.0) return 1.0;
  return atom / (atom + cont);
}

double ImmigrationLaw::mean() const {
  if (kind == Kind::EdgeJump) return levy.moment(2, lambda, eps, kInf) / rate();
  const double cont = 1.0 - atom_at_zero();
  if (cont == 0.0) return 0.0;
  return cont * levy.moment(k + 1, lambda, 0.0, kInf) / levy.moment(k, lambda, 0.0, kInf);
}

double ImmigrationLaw::second_moment() const {
  if (kind == Kind::EdgeJump) return levy.moment(3, lambda, eps, kInf) / rate();
  const double cont = 1.0 - atom_at_zero();
  if (cont == 0.0) return 0.0;
  return cont * levy.moment(k + 2, lambda, 0.0, kInf) / levy.moment(k, lambda, 0.0, kInf);
}

double sample_immigration(const ImmigrationLaw& law, Rng& rng) {
  if (law.kind == ImmigrationLaw::Kind::EdgeJump) {
    return law.levy.sample_weighted(1, law.lambda, law.eps, rng);
  }
  if (law.k == 1) throw InvalidLawError("sample_immigration: eta_1 has no mass");
  const double atom = law.atom_at_zero();
  if (atom >= 1.0) return 0.0;
  if (atom > 0.0 && rng.uniform() < atom) return 0.0;
  return law.levy.sample_weighted(law.k, law.lambda, 0.0, rng);
}

BranchLaw BranchLaw::homogeneous(const BranchingMechanism& mech, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("BranchLaw: lambda must be positive");
  BranchLaw b;
  b.levy_ = mech.levy();
  b.u_ = lambda;
  b.rate_ = psi_prime(mech, lambda);
  if (!(b.rate_ > 0.0)) throw DomainError("BranchLaw: psi'(lambda) must be positive");
  const double denom = lambda * b.rate_;
  double death = psi(mech, lambda);
  if (classify(mech) == Criticality::Supercritical) {
    const double ls = lambda_star(mech);
    if (std::abs(lambda - ls) <= 1e-12 * ls) death = 0.0;
  }
  b.p_death_ = std::max(0.0, death) / denom;
  b.p_binary_ = mech.beta() * lambda * lambda / denom;
  return b;
}

BranchLaw BranchLaw::horizon(const BranchingMechanism& mech, double u) {
  if (!(u > 0.0)) throw DomainError("BranchLaw: u must be positive");
  BranchLaw b;
  b.levy_ = mech.levy();
  b.u_ = u;
  const double num = prolific_numerator(mech, u);
  b.rate_ = num / u;
  b.p_death_ = 0.0;
  b.p_binary_ = mech.beta() * u * u / num;
  return b;
}

BranchOutcome BranchLaw::sample(Rng& rng) const {
  const double v = rng.uniform();
  if (v < p_death_) return {0, 0.0};
  if (v < p_death_ + p_binary_ || levy_.is_none()) return {2, 0.0};
  const double r = levy_.sample_prolific(u_, rng);
  return {poisson_at_least_two(u_ * r, rng), r};
}

}  // namespace csbp
