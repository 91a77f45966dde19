#pragma once

#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace csbp {

class Rng;

struct NoJumps {};

/// Pi(dr) = c e^{-b r} dr. Tilting by e^{-lambda r} just moves b.
struct ExponentialJumps {
  double c = 1.0;
  double b = 1.0;
};

/// Pi(dr) = c r^{-1-a} e^{-tilt r} dr with a in (1, 2).
struct StableJumps {
  double c = 1.0;
  double a = 1.5;
  double tilt = 0.0;
};

/// Finitely many atoms: Pi = sum_i m_i delta_{r_i}.
struct AtomJumps {
  std::vector<std::pair<double, double>> atoms;  // (r_i, m_i)
};

/// The jump measure of a branching mechanism, restricted to a closed set of
/// parametric families so every integral used downstream has a closed form.
///
/// All integrals are against the measure as stored, i.e. after any tilt.
class LevyMeasure {
 public:
  using Variant = std::variant<NoJumps, ExponentialJumps, StableJumps, AtomJumps>;

  LevyMeasure() = default;

  static LevyMeasure none();
  static LevyMeasure exponential(double c, double b);
  /// Validates the closed forms against quadrature before returning.
  static LevyMeasure stable_tail(double c, double a, double tilt = 0.0);
  static LevyMeasure atoms(std::vector<std::pair<double, double>> atoms);

  const Variant& family() const { return v_; }
  bool is_none() const { return std::holds_alternative<NoJumps>(v_); }
  bool is_stable() const { return std::holds_alternative<StableJumps>(v_); }
  /// True when the measure has finite total mass.
  bool finite_activity() const { return !is_stable(); }

  /// The measure e^{-lambda r} Pi(dr).
  LevyMeasure tilted(double lambda) const;

  /// \int (e^{-theta r} - 1 + theta r) Pi(dr)
  double psi_integral(double theta) const;
  /// \int (1 - e^{-theta r}) r Pi(dr)
  double psi_prime_integral(double theta) const;
  /// \int (1 - e^{-u r}(1 + u r)) Pi(dr) = u psi_int'(u) - psi_int(u)
  double prolific_weight(double u) const;
  /// \int (s r)^k / k! e^{-s r} Pi(dr), k >= 2 (k = 0, 1 only for finite mass).
  double poisson_weight(int k, double s) const;

  /// \int_{lo}^{hi} r^j e^{-s r} Pi(dr); hi may be +inf. Returns +inf when divergent.
  double moment(int j, double s, double lo, double hi) const;

  double tail_mass(double eps) const;
  double tail_first_moment(double eps) const;
  double small_first_moment(double eps) const;
  double small_second_moment(double eps) const;

  /// Draw from r^k e^{-s r} Pi(dr) restricted to [eps, inf), normalised.
  double sample_weighted(int k, double s, double eps, Rng& rng) const;
  /// Draw from Pi restricted to [eps, inf), normalised.
  double sample_tail(double eps, Rng& rng) const { return sample_weighted(0, 0.0, eps, rng); }
  /// Draw from (1 - e^{-u r}(1 + u r)) Pi(dr), normalised: the jump size that
  /// produces a branch point with at least two prolific offspring.
  double sample_prolific(double u, Rng& rng) const;

  /// \int f(r) Pi(dr) by adaptive quadrature (or a finite sum for atoms).
  double integrate(const std::function<double(double)>& f) const;

  std::string describe() const;
  nlohmann::ordered_json to_json() const;

 private:
  explicit LevyMeasure(Variant v) : v_(std::move(v)) {}
  double sample_segment(int k, double s, double lo, double hi, Rng& rng) const;
  Variant v_{NoJumps{}};
};

}  // namespace csbp
