#pragma once

// Scalar numerical helpers shared by the core modules. Not installed.

#include <functional>

namespace csbp::detail {

/// e^{-x} - 1 + x without cancellation for small x.
double exp_m1_plus(double x);

/// 1 - e^{-x} without cancellation (-expm1(-x)).
double one_minus_exp(double x);

/// 1 - e^{-x}(1 + x) without cancellation for small x.
double one_minus_exp_poly1(double x);

/// Upper incomplete gamma Gamma(s, x) for any real s (x > 0 when s <= 0).
double upper_gamma(double s, double x);

/// Lower incomplete gamma gamma(s, x), s > 0.
double lower_gamma(double s, double x);

/// log Gamma(s), s > 0.
double log_gamma(double s);

/// Gamma(s) for non-integer s (negative allowed).
double gamma_fn(double s);

/// Integral of f over (0, inf); tolerates an integrable singularity at 0.
double integrate_half_line(const std::function<double(double)>& f, double rel_tol = 1e-12);

/// Integral of f over [a, b] with possible endpoint singularities.
double integrate_interval(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-12);

/// Smooth integrand on [a, b], adaptive Gauss-Kronrod.
double integrate_smooth(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-13);

/// Root of a monotone f on [lo, hi] (f(lo), f(hi) of opposite sign).
double solve_bracketed(const std::function<double(double)>& f, double lo, double hi,
                       int max_iter = 200);

}  // namespace csbp::detail
