#pragma once

// Closed forms for quadratic mechanisms psi(t) = b t^2 - a t, written out
// independently of the library so tests do not grade the solver with itself.

#include <cmath>

namespace oracle {

inline double u(double a, double b, double theta, double t) {
  if (a == 0.0) return theta / (1.0 + b * theta * t);
  const double e = std::exp(a * t);
  return a * theta * e / (a + b * theta * (e - 1.0));
}

inline double u_inf(double a, double b, double t) {
  if (a == 0.0) return 1.0 / (b * t);
  const double e = std::exp(a * t);
  return a * e / (b * (e - 1.0));
}

inline double du_dtheta(double a, double b, double theta, double t) {
  const double e = std::exp(a * t);
  const double d = a + b * theta * (e - 1.0);
  return a * a * e / (d * d);
}

// \int_0^t 2 b u_v(theta) dv, using du/dv = -(b u - a) u.
inline double int_phi0(double a, double b, double theta, double t) {
  return 2.0 * std::log((b * theta - a) / (b * u(a, b, theta, t) - a));
}

inline double laplace_immigration(double a, double b, double x, int n, double t, double theta) {
  return std::exp(-x * u(a, b, theta, t) - n * int_phi0(a, b, theta, t));
}

inline double v_exponent(double a, double b, double T, double t, double theta) {
  return u(a, b, theta + u_inf(a, b, T - t), t) - u_inf(a, b, T);
}

// psi(u) / u = b u - a
inline double gamma_survival(double a, double b, double T, double t) {
  return (b * u_inf(a, b, T) - a) / (b * u_inf(a, b, T - t) - a);
}

}  // namespace oracle
