#include "numerics.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>

#include "csbp/errors.hpp"

namespace csbp::detail {

double exp_m1_plus(double x) {
  if (std::abs(x) < 1e-2) {
    // x^2/2 - x^3/6 + x^4/24 - ...
    double term = x * x / 2.0;
    double sum = term;
    for (int n = 3; n < 12; ++n) {
      term *= -x / n;
      sum += term;
    }
    return sum;
  }
  return std::expm1(-x) + x;
}

double one_minus_exp(double x) { return -std::expm1(-x); }

double one_minus_exp_poly1(double x) {
  if (std::abs(x) < 1e-2) {
    // sum_{k>=2} (-1)^k x^k (k-1)/k!
    double fact = 1.0;
    double pw = 1.0;
    double sum = 0.0;
    for (int k = 1; k < 12; ++k) {
      fact *= k;
      pw *= -x;
      if (k >= 2) sum += pw * (k - 1) / fact;
    }
    return sum;
  }
  return 1.0 - std::exp(-x) * (1.0 + x);
}

double upper_gamma(double s, double x) {
  if (s > 0.0) return boost::math::tgamma(s, x);
  if (!(x > 0.0)) return std::numeric_limits<double>::infinity();
  // Gamma(s, x) = (Gamma(s + 1, x) - x^s e^{-x}) / s
  return (upper_gamma(s + 1.0, x) - std::pow(x, s) * std::exp(-x)) / s;
}

double lower_gamma(double s, double x) { return boost::math::tgamma_lower(s, x); }

double log_gamma(double s) { return boost::math::lgamma(s); }

double gamma_fn(double s) { return boost::math::tgamma(s); }

double integrate_half_line(const std::function<double(double)>& f, double rel_tol) {
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;
  const double head = ts.integrate(f, 0.0, 1.0, rel_tol);
  const double tail = es.integrate(f, 1.0, std::numeric_limits<double>::infinity(), rel_tol);
  return head + tail;
}

double integrate_interval(const std::function<double(double)>& f, double a, double b,
                          double rel_tol) {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, a, b, rel_tol);
}

double integrate_smooth(const std::function<double(double)>& f, double a, double b,
                        double rel_tol) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol);
}

double solve_bracketed(const std::function<double(double)>& f, double lo, double hi,
                       int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw NumericalError("solve_bracketed: root not bracketed");
  boost::uintmax_t iters = static_cast<boost::uintmax_t>(max_iter);
  auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 3);
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  if (static_cast<int>(iters) >= max_iter) throw NumericalError("solve_bracketed: no convergence");
  return 0.5 * (a + b);
}

}  // namespace csbp::detail
