#include "csbp/levy.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "csbp/errors.hpp"
#include "csbp/rng.hpp"
#include "numerics.hpp"

namespace csbp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double poisson_pmf(int k, double mean) {
  if (mean <= 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(mean) - mean - detail::log_gamma(k + 1.0));
}

// \int_lo^hi r^{e-1} e^{-rho r} dr
double gamma_segment(double e, double rho, double lo, double hi) {
  if (rho <= 0.0) {
    if (e > 0.0) {
      if (hi == kInf) return kInf;
      return (std::pow(hi, e) - std::pow(lo, e)) / e;
    }
    if (lo <= 0.0) return kInf;
    const double top = hi == kInf ? 0.0 : std::pow(hi, e);
    return (std::pow(lo, e) - top) / (-e);
  }
  const double scale = std::pow(rho, -e);
  if (lo <= 0.0) {
    if (e <= 0.0) return kInf;
    if (hi == kInf) return scale * detail::gamma_fn(e);
    return scale * detail::lower_gamma(e, rho * hi);
  }
  const double top = hi == kInf ? 0.0 : detail::upper_gamma(e, rho * hi);
  if (e > 0.0 && hi != kInf && rho * hi < 1.0) {
    return scale * (detail::lower_gamma(e, rho * hi) - detail::lower_gamma(e, rho * lo));
  }
  return scale * (detail::upper_gamma(e, rho * lo) - top);
}

// (1 + x)^a - 1 - a x
double stable_psi_core(double a, double x) {
  if (x < 0.05) {
    double binom = a * (a - 1.0) / 2.0;
    double pw = x * x;
    double sum = 0.0;
    for (int k = 2; k < 40; ++k) {
      const double term = binom * pw;
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      binom *= (a - k) / (k + 1.0);
      pw *= x;
    }
    return sum;
  }
  return std::expm1(a * std::log1p(x)) - a * x;
}

// a x (1 + x)^{a-1} - (1 + x)^a + 1
double stable_prolific_core(double a, double x) {
  if (x < 0.05) {
    double binom = a * (a - 1.0) / 2.0;
    double pw = x * x;
    double sum = 0.0;
    for (int k = 2; k < 40; ++k) {
      const double term = (k - 1.0) * binom * pw;
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      binom *= (a - k) / (k + 1.0);
      pw *= x;
    }
    return sum;
  }
  return a * x * std::pow(1.0 + x, a - 1.0) - std::expm1(a * std::log1p(x));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string("levy measure: ") + what + " must be positive and finite");
  }
}

}  // namespace

LevyMeasure LevyMeasure::none() { return LevyMeasure(NoJumps{}); }

LevyMeasure LevyMeasure::exponential(double c, double b) {
  check_positive(c, "c");
  check_positive(b, "b");
  return LevyMeasure(ExponentialJumps{c, b});
}

LevyMeasure LevyMeasure::stable_tail(double c, double a, double tilt) {
  check_positive(c, "c");
  if (!(a > 1.0 && a < 2.0)) throw DomainError("levy measure: stable index a must lie in (1, 2)");
  if (!(tilt >= 0.0) || !std::isfinite(tilt)) throw DomainError("levy measure: tilt must be >= 0");
  LevyMeasure m(StableJumps{c, a, tilt});
  for (double theta : {0.3, 2.0, 17.0}) {
    const double closed = m.psi_integral(theta);
    const double quad = m.integrate([theta](double r) { return detail::exp_m1_plus(theta * r); });
    const double closed_d = m.psi_prime_integral(theta);
    const double quad_d =
        m.integrate([theta](double r) { return detail::one_minus_exp(theta * r) * r; });
    if (std::abs(closed - quad) > 1e-8 * std::abs(quad) ||
        std::abs(closed_d - quad_d) > 1e-8 * std::abs(quad_d)) {
      throw NumericalError("stable_tail: closed form disagrees with quadrature at theta=" +
                           fmt(theta));
    }
  }
  return m;
}

LevyMeasure LevyMeasure::atoms(std::vector<std::pair<double, double>> atoms) {
  if (atoms.empty()) throw DomainError("levy measure: atom list is empty");
  for (const auto& [r, w] : atoms) {
    check_positive(r, "atom location");
    check_positive(w, "atom mass");
  }
  return LevyMeasure(AtomJumps{std::move(atoms)});
}

LevyMeasure LevyMeasure::tilted(double lambda) const {
  if (!(lambda >= 0.0)) throw DomainError("tilted: lambda must be >= 0");
  return std::visit(
      overloaded{
          [](const NoJumps&) { return LevyMeasure(NoJumps{}); },
          [&](const ExponentialJumps& e) { return LevyMeasure(ExponentialJumps{e.c, e.b + lambda}); },
          [&](const StableJumps& s) { return LevyMeasure(StableJumps{s.c, s.a, s.tilt + lambda}); },
          [&](const AtomJumps& at) {
            AtomJumps out;
            for (const auto& [r, w] : at.atoms) out.atoms.emplace_back(r, w * std::exp(-lambda * r));
            return LevyMeasure(std::move(out));
          },
      },
      v_);
}

double LevyMeasure::psi_integral(double theta) const {
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [&](const ExponentialJumps& e) { return e.c * theta * theta / (e.b * e.b * (e.b + theta)); },
          [&](const StableJumps& s) {
            const double g = s.c * detail::gamma_fn(-s.a);
            if (s.tilt == 0.0) return g * std::pow(theta, s.a);
            return g * std::pow(s.tilt, s.a) * stable_psi_core(s.a, theta / s.tilt);
          },
          [&](const AtomJumps& at) {
            double sum = 0.0;
            for (const auto& [r, w] : at.atoms) sum += w * detail::exp_m1_plus(theta * r);
            return sum;
          },
      },
      v_);
}

double LevyMeasure::psi_prime_integral(double theta) const {
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [&](const ExponentialJumps& e) {
            // c (1/b^2 - 1/(b+theta)^2) = c theta (2b + theta) / (b^2 (b+theta)^2)
            const double bt = e.b + theta;
            return e.c * theta * (2.0 * e.b + theta) / (e.b * e.b * bt * bt);
          },
          [&](const StableJumps& s) {
            const double g = s.c * detail::gamma_fn(-s.a) * s.a;
            if (s.tilt == 0.0) return g * std::pow(theta, s.a - 1.0);
            return g * std::pow(s.tilt, s.a - 1.0) *
                   std::expm1((s.a - 1.0) * std::log1p(theta / s.tilt));
          },
          [&](const AtomJumps& at) {
            double sum = 0.0;
            for (const auto& [r, w] : at.atoms) sum += w * r * detail::one_minus_exp(theta * r);
            return sum;
          },
      },
      v_);
}

double LevyMeasure::prolific_weight(double u) const {
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [&](const ExponentialJumps& e) {
            const double bu = e.b + u;
            return e.c * u * u / (e.b * bu * bu);
          },
          [&](const StableJumps& s) {
            const double g = s.c * detail::gamma_fn(-s.a);
            if (s.tilt == 0.0) return g * (s.a - 1.0) * std::pow(u, s.a);
            return g * std::pow(s.tilt, s.a) * stable_prolific_core(s.a, u / s.tilt);
          },
          [&](const AtomJumps& at) {
            double sum = 0.0;
            for (const auto& [r, w] : at.atoms) sum += w * detail::one_minus_exp_poly1(u * r);
            return sum;
          },
      },
      v_);
}

double LevyMeasure::poisson_weight(int k, double s) const {
  if (k < 0) throw DomainError("poisson_weight: k must be >= 0");
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [&](const ExponentialJumps& e) {
            const double bs = e.b + s;
            // (s / bs)^k stays in [0, 1]; s^k alone overflows for large u and k
            return e.c * std::pow(s / bs, k) / bs;
          },
          [&](const StableJumps& st) {
            if (k < 2) return kInf;
            if (s == 0.0) return 0.0;
            const double e = k - st.a;
            return std::exp(std::log(st.c) + k * std::log(s) - detail::log_gamma(k + 1.0) +
                            detail::log_gamma(e) - e * std::log(st.tilt + s));
          },
          [&](const AtomJumps& at) {
            double sum = 0.0;
            for (const auto& [r, w] : at.atoms) sum += w * poisson_pmf(k, s * r);
            return sum;
          },
      },
      v_);
}

double LevyMeasure::moment(int j, double s, double lo, double hi) const {
  if (j < 0 || s < 0.0 || lo < 0.0 || hi < lo) throw DomainError("moment: bad arguments");
  if (lo == hi) return 0.0;
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [&](const ExponentialJumps& e) { return e.c * gamma_segment(j + 1.0, e.b + s, lo, hi); },
          [&](const StableJumps& st) { return st.c * gamma_segment(j - st.a, st.tilt + s, lo, hi); },
          [&](const AtomJumps& at) {
            double sum = 0.0;
            for (const auto& [r, w] : at.atoms) {
              if (r >= lo && r < hi) sum += w * std::pow(r, j) * std::exp(-s * r);
            }
            return sum;
          },
      },
      v_);
}

double LevyMeasure::tail_mass(double eps) const { return moment(0, 0.0, eps, kInf); }
double LevyMeasure::tail_first_moment(double eps) const { return moment(1, 0.0, eps, kInf); }
double LevyMeasure::small_first_moment(double eps) const { return moment(1, 0.0, 0.0, eps); }
double LevyMeasure::small_second_moment(double eps) const { return moment(2, 0.0, 0.0, eps); }

namespace {

constexpr int kMaxTries = 1 << 20;

// Draw from the density proportional to r^{e-1} e^{-rho r} on [lo, hi].
// Supported shapes: [lo, inf) with lo > 0 or e > 0, and [0, hi] with e > 0.
double sample_power_exp(double e, double rho, double lo, double hi, Rng& rng) {
  if (hi < kInf) {
    if (lo != 0.0 || !(e > 0.0)) throw InvalidLawError("sample_power_exp: unsupported segment");
    for (int i = 0; i < kMaxTries; ++i) {
      if (rho * hi <= 1.0) {
        const double r = hi * std::pow(rng.uniform(), 1.0 / e);
        if (rng.uniform() < std::exp(-rho * r)) return r;
      } else {
        const double r = rng.gamma(e, rho);
        if (r <= hi) return r;
      }
    }
    throw NumericalError("sample_power_exp: rejection sampler stalled");
  }
  if (e > 0.0) {
    if (!(rho > 0.0)) throw InvalidLawError("sample_power_exp: law is not normalisable");
    if (lo == 0.0) return rng.gamma(e, rho);
    for (int i = 0; i < kMaxTries; ++i) {
      if (rho * lo < 1.0 || e > 1.0) {
        const double r = rng.gamma(e, rho);
        if (r >= lo) return r;
      } else {
        const double r = lo + rng.exponential(rho);
        if (rng.uniform() < std::pow(r / lo, e - 1.0)) return r;
      }
    }
    throw NumericalError("sample_power_exp: rejection sampler stalled");
  }
  if (!(lo > 0.0)) throw InvalidLawError("sample_power_exp: needs a positive cutoff");
  for (int i = 0; i < kMaxTries; ++i) {
    if (rho * lo < 1.0) {
      // Pareto proposal, accept with the exponential factor.
      const double r = lo * std::pow(rng.uniform(), 1.0 / e);
      if (rng.uniform() < std::exp(-rho * (r - lo))) return r;
    } else {
      // Shifted exponential proposal, accept with the power factor.
      const double r = lo + rng.exponential(rho);
      if (rng.uniform() < std::pow(lo / r, 1.0 - e)) return r;
    }
  }
  throw NumericalError("sample_power_exp: rejection sampler stalled");
}

}  // namespace

double LevyMeasure::sample_segment(int k, double s, double lo, double hi, Rng& rng) const {
  return std::visit(
      overloaded{
          [](const NoJumps&) -> double {
            throw InvalidLawError("sample_weighted: measure has no jumps");
          },
          [&](const ExponentialJumps& e) -> double {
            if (k == 0 && hi == kInf) return lo + rng.exponential(e.b + s);
            return sample_power_exp(k + 1.0, e.b + s, lo, hi, rng);
          },
          [&](const StableJumps& st) -> double {
            return sample_power_exp(k - st.a, st.tilt + s, lo, hi, rng);
          },
          [&](const AtomJumps& at) -> double {
            double total = 0.0;
            for (const auto& [r, w] : at.atoms) {
              if (r >= lo && r <= hi) total += w * std::pow(r, k) * std::exp(-s * r);
            }
            if (!(total > 0.0)) throw InvalidLawError("sample_weighted: no atom in range");
            double target = rng.uniform() * total;
            double last = 0.0;
            for (const auto& [r, w] : at.atoms) {
              if (r < lo || r > hi) continue;
              last = r;
              target -= w * std::pow(r, k) * std::exp(-s * r);
              if (target <= 0.0) return r;
            }
            return last;
          },
      },
      v_);
}

double LevyMeasure::sample_weighted(int k, double s, double eps, Rng& rng) const {
  return sample_segment(k, s, eps, kInf, rng);
}

double LevyMeasure::sample_prolific(double u, Rng& rng) const {
  if (!(u > 0.0)) throw DomainError("sample_prolific: u must be positive");
  if (const auto* at = std::get_if<AtomJumps>(&v_)) {
    double total = 0.0;
    for (const auto& [r, w] : at->atoms) total += w * detail::one_minus_exp_poly1(u * r);
    double target = rng.uniform() * total;
    for (const auto& [r, w] : at->atoms) {
      target -= w * detail::one_minus_exp_poly1(u * r);
      if (target <= 0.0) return r;
    }
    return at->atoms.back().first;
  }
  if (is_none()) throw InvalidLawError("sample_prolific: measure has no jumps");
  // Envelope min((u r)^2 / 2, 1) >= P(Poisson(u r) >= 2), split at R.
  const double cut = std::sqrt(2.0) / u;
  const double mass_small = 0.5 * u * u * moment(2, 0.0, 0.0, cut);
  const double mass_large = moment(0, 0.0, cut, kInf);
  const double p_small = mass_small / (mass_small + mass_large);
  for (int i = 0; i < kMaxTries; ++i) {
    const bool small = rng.uniform() < p_small;
    const double r = small ? sample_segment(2, 0.0, 0.0, cut, rng)
                           : sample_segment(0, 0.0, cut, kInf, rng);
    const double x = u * r;
    const double envelope = small ? 0.5 * x * x : 1.0;
    if (rng.uniform() * envelope < detail::one_minus_exp_poly1(x)) return r;
  }
  throw NumericalError("sample_prolific: rejection sampler stalled");
}

double LevyMeasure::integrate(const std::function<double(double)>& f) const {
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [&](const ExponentialJumps& e) {
            return detail::integrate_half_line(
                [&](double r) { return e.c * std::exp(-e.b * r) * f(r); });
          },
          [&](const StableJumps& st) {
            return detail::integrate_half_line([&](double r) {
              const double fr = f(r);
              if (r == 0.0 || fr == 0.0) return 0.0;
              // log form: r^{-1-a} overflows where f(r) underflows
              const double mag = std::exp(std::log(std::abs(fr)) - (1.0 + st.a) * std::log(r) -
                                          st.tilt * r);
              return std::copysign(st.c * mag, fr);
            });
          },
          [&](const AtomJumps& at) {
            double sum = 0.0;
            for (const auto& [r, w] : at.atoms) sum += w * f(r);
            return sum;
          },
      },
      v_);
}

std::string LevyMeasure::describe() const {
  return std::visit(
      overloaded{
          [](const NoJumps&) -> std::string { return "None"; },
          [](const ExponentialJumps& e) -> std::string {
            return "Exponential(c=" + fmt(e.c) + ", b=" + fmt(e.b) + ")";
          },
          [](const StableJumps& s) -> std::string {
            std::string out = "StableTail(c=" + fmt(s.c) + ", a=" + fmt(s.a);
            if (s.tilt != 0.0) out += ", tilt=" + fmt(s.tilt);
            return out + ")";
          },
          [](const AtomJumps& at) -> std::string {
            std::string out = "Atoms[";
            for (std::size_t i = 0; i < at.atoms.size(); ++i) {
              if (i) out += ", ";
              out += "(" + fmt(at.atoms[i].first) + "," + fmt(at.atoms[i].second) + ")";
            }
            return out + "]";
          },
      },
      v_);
}

nlohmann::ordered_json LevyMeasure::to_json() const {
  return std::visit(
      overloaded{
          [](const NoJumps&) { return nlohmann::ordered_json{{"family", "none"}}; },
          [](const ExponentialJumps& e) {
            return nlohmann::ordered_json{{"family", "exponential"}, {"c", e.c}, {"b", e.b}};
          },
          [](const StableJumps& s) {
            return nlohmann::ordered_json{
                {"family", "stable_tail"}, {"c", s.c}, {"a", s.a}, {"tilt", s.tilt}};
          },
          [](const AtomJumps& at) {
            nlohmann::ordered_json list = nlohmann::ordered_json::array();
            for (const auto& [r, w] : at.atoms) list.push_back({r, w});
            return nlohmann::ordered_json{{"family", "atoms"}, {"atoms", list}};
          },
      },
      v_);
}

}  // namespace csbp
