#include "csbp/evolution.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <ostream>

#include "csbp/errors.hpp"
#include "csbp/io.hpp"
#include "numerics.hpp"

namespace csbp {

namespace odeint = boost::numeric::odeint;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRelTol = 1e-12;
// States are logarithms of u-like quantities or bounded integrals, so an
// absolute tolerance on them is a relative one on u.
constexpr double kAbsTol = 1e-13;

// u = shift + x where x follows the mechanism m. For supercritical mechanisms
// started above lambda*, m is the Esscher transform at lambda*, so convergence
// of u to lambda* is resolved in relative terms.
struct Frame {
  BranchingMechanism m;
  double shift;
};

Frame frame_above_root(const BranchingMechanism& mech) {
  if (classify(mech) == Criticality::Supercritical) {
    const double ls = lambda_star(mech);
    return {esscher(mech, ls), ls};
  }
  return {mech, 0.0};
}

void require_grey(const BranchingMechanism& mech) {
  if (!greys_condition(mech)) {
    throw DomainError("Grey's condition fails: u_t(inf) is infinite");
  }
}

// \int_v^inf dxi / psi_m(xi), psi_m > 0 on (0, inf).
double time_to_infinity(const BranchingMechanism& m, double v) {
  double head = 0.0;
  double w = v;
  if (v < 1.0) {
    head = detail::integrate_smooth(
        [&](double s) {
          const double xi = std::exp(s);
          return xi / psi(m, xi);
        },
        std::log(v), 0.0, 1e-13);
    w = 1.0;
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  auto tail_integrand = [&](double x, double xc) {
    const double one_minus_x = x > 0.5 ? xc : 1.0 - x;
    if (one_minus_x <= 0.0) return 0.0;
    const double xi = w / one_minus_x;
    if (!std::isfinite(xi) || xi > 1e250) return 0.0;
    return xi / psi(m, xi) / one_minus_x;
  };
  const double tail = ts.integrate(tail_integrand, 0.0, 1.0, 1e-13);
  return head + tail;
}

// x-part of u_t(inf) by root-finding t = \int_x^inf dxi / psi_m(xi) in y = ln x.
double excess_by_root(const BranchingMechanism& m, double t) {
  auto f = [&](double y) { return time_to_infinity(m, std::exp(y)) - t; };
  double lo = 0.0;
  double hi = 0.0;
  if (f(0.0) > 0.0) {
    hi = 2.0;
    while (f(hi) > 0.0) {
      lo = hi;
      hi += 4.0;
      if (hi > 700.0) throw NumericalError("u_infinity: cannot bracket root");
    }
  } else {
    lo = -2.0;
    while (f(lo) < 0.0) {
      hi = lo;
      lo -= 4.0;
      if (lo < -700.0) throw NumericalError("u_infinity: cannot bracket root");
    }
  }
  return std::exp(detail::solve_bracketed(f, lo, hi));
}

// x-part of u_t(cap) through w = 1/x: d ln w/ds = psi_m(1/w) w.
double excess_by_ode(const BranchingMechanism& m, double t, double cap) {
  double lw = -std::log(cap);
  auto rhs = [&](const double& y, double& dydt, double) {
    const double w = std::exp(y);
    dydt = psi(m, 1.0 / w) * w;
  };
  try {
    odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<double>>(
                                   kAbsTol, kRelTol),
                               rhs, lw, 0.0, t, 1e-9 * t);
  } catch (const std::exception& e) {
    throw NumericalError(std::string("u_infinity cross-check ODE failed: ") + e.what());
  }
  return std::exp(-lw);
}

double excess_by_ode_converged(const BranchingMechanism& m, double t) {
  double cap = 1e6;
  double prev = excess_by_ode(m, t, cap);
  for (int i = 0; i < 80; ++i) {
    cap *= 2.0;
    const double next = excess_by_ode(m, t, cap);
    if (std::abs(next - prev) < 1e-8 * std::abs(next)) return next;
    prev = next;
  }
  throw NumericalError("u_infinity: backward ODE did not settle as the cap grew");
}

double excess_infinity(const Frame& fr, double t) {
  if (!(t > 0.0)) throw DomainError("u_infinity: t must be positive");
  const double root = excess_by_root(fr.m, t);
  const double ode = excess_by_ode_converged(fr.m, t);
  if (std::abs(root - ode) > 1e-6 * root) {
    throw NumericalError("u_infinity: root " + format_double(root) + " and ODE " +
                         format_double(ode) + " disagree");
  }
  return root;
}

using FlowState = std::array<double, 3>;  // ln x, \int psi'(u), \int phi_0(u)

struct Flow {
  Frame frame;
  double theta;
};

Flow flow_for(const BranchingMechanism& mech, double theta) {
  if (classify(mech) == Criticality::Supercritical) {
    const double ls = lambda_star(mech);
    if (theta >= ls) return {{esscher(mech, ls), ls}, theta};
  }
  return {{mech, 0.0}, theta};
}

}  // namespace

void EvolutionTable::write_csv(std::ostream& os, bool with_derivative) const {
  if (with_derivative) {
    CsvWriter w(os, {"t", "u", "du_dtheta"});
    for (std::size_t i = 0; i < times.size(); ++i) {
      w << times[i] << u[i] << du_dtheta[i];
      w.end_row();
    }
  } else {
    CsvWriter w(os, {"t", "u"});
    for (std::size_t i = 0; i < times.size(); ++i) {
      w << times[i] << u[i];
      w.end_row();
    }
  }
}

EvolutionTable solve_u(const BranchingMechanism& mech, double theta,
                       const std::vector<double>& times) {
  if (!(theta >= 0.0)) throw DomainError("solve_u: theta must be >= 0");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] <= times[i - 1])) {
      throw DomainError("solve_u: times must be increasing and >= 0");
    }
  }
  EvolutionTable tab;
  tab.theta = theta;
  tab.times = times;
  tab.tol = kRelTol;
  const std::size_t n = times.size();
  tab.u.resize(n);
  tab.du_dtheta.resize(n);
  tab.int_phi0.resize(n);

  if (std::isinf(theta)) {
    require_grey(mech);
    const Frame fr = frame_above_root(mech);
    for (std::size_t i = 0; i < n; ++i) {
      tab.u[i] = times[i] == 0.0 ? kInf : fr.shift + excess_infinity(fr, times[i]);
      tab.du_dtheta[i] = times[i] == 0.0 ? 1.0 : 0.0;
      tab.int_phi0[i] = times[i] == 0.0 ? 0.0 : kInf;
    }
    return tab;
  }

  const Flow fl = flow_for(mech, theta);
  const double x0 = theta - fl.frame.shift;
  if (x0 == 0.0) {
    // Fixed point of the flow: 0, or lambda* for supercritical mechanisms.
    const double d = psi_prime(mech, theta);
    const double p0 = phi(mech, 0.0, theta);
    for (std::size_t i = 0; i < n; ++i) {
      tab.u[i] = theta;
      tab.du_dtheta[i] = std::exp(-d * times[i]);
      tab.int_phi0[i] = p0 * times[i];
    }
    return tab;
  }

  auto rhs = [&](const FlowState& y, FlowState& dydt, double) {
    const double x = std::exp(y[0]);
    const double u = fl.frame.shift + x;
    dydt[0] = -psi(fl.frame.m, x) / x;
    dydt[1] = psi_prime(mech, u);
    dydt[2] = phi(mech, 0.0, u);
  };
  std::vector<double> grid;
  grid.reserve(n + 1);
  if (n == 0 || times.front() > 0.0) grid.push_back(0.0);
  grid.insert(grid.end(), times.begin(), times.end());
  const std::size_t offset = grid.size() - n;

  FlowState y{std::log(x0), 0.0, 0.0};
  std::vector<FlowState> out;
  out.reserve(grid.size());
  if (grid.size() == 1) {
    out.push_back(y);
  } else {
    const double dt0 = 1e-6 * std::min(1.0, 1.0 / (1.0 + std::abs(psi_prime(mech, theta))));
    try {
      odeint::integrate_times(
          odeint::make_dense_output(kAbsTol, kRelTol, odeint::runge_kutta_dopri5<FlowState>()),
          rhs, y, grid.begin(), grid.end(), dt0,
          [&](const FlowState& s, double) { out.push_back(s); });
    } catch (const std::exception& e) {
      throw NumericalError(std::string("solve_u: ODE solver failed: ") + e.what());
    }
  }
  if (out.size() != grid.size()) throw NumericalError("solve_u: solver produced a short table");
  for (std::size_t i = 0; i < n; ++i) {
    const FlowState& s = out[i + offset];
    tab.u[i] = fl.frame.shift + std::exp(s[0]);
    tab.du_dtheta[i] = std::exp(-s[1]);
    tab.int_phi0[i] = s[2];
  }
  return tab;
}

double u_at(const BranchingMechanism& mech, double theta, double t) {
  if (t == 0.0) return theta;
  return solve_u(mech, theta, {t}).u.front();
}

double u_infinity(const BranchingMechanism& mech, double t) {
  require_grey(mech);
  const Frame fr = frame_above_root(mech);
  return fr.shift + excess_infinity(fr, t);
}

double v_exponent(const BranchingMechanism& mech, double T, double t, double theta) {
  if (!(t >= 0.0 && t < T)) throw DomainError("v_exponent: need 0 <= t < T");
  if (!(theta >= 0.0)) throw DomainError("v_exponent: theta must be >= 0");
  const double uT = u_infinity(mech, T);
  if (t == 0.0) return theta;
  const double uTt = u_infinity(mech, T - t);
  return u_at(mech, theta + uTt, t) - uT;
}

double du_dtheta(const BranchingMechanism& mech, double theta, double t) {
  if (!(theta > 0.0)) throw DomainError("du_dtheta: theta must be positive");
  if (t == 0.0) return 1.0;
  return solve_u(mech, theta, {t}).du_dtheta.front();
}

double log_laplace_csbp(const BranchingMechanism& mech, double x, double t, double theta) {
  if (!(x >= 0.0)) throw DomainError("laplace: x must be >= 0");
  if (x == 0.0) return 0.0;
  return -x * u_at(mech, theta, t);
}

double log_laplace_immigration(const BranchingMechanism& mech, double x, int n, double t,
                               double theta) {
  if (!(x >= 0.0) || n < 0) throw DomainError("laplace_immigration: need x >= 0, n >= 0");
  if (t == 0.0) return -x * theta;
  const auto tab = solve_u(mech, theta, {t});
  return -x * tab.u.front() - n * tab.int_phi0.front();
}

double log_laplace_die_by_T(const BranchingMechanism& mech, double T, double x, double t,
                            double theta) {
  if (!(x >= 0.0)) throw DomainError("laplace: x must be >= 0");
  if (x == 0.0 || theta == 0.0) return 0.0;
  return -x * v_exponent(mech, T, t, theta);
}

double laplace_csbp(const BranchingMechanism& mech, double x, double t, double theta) {
  return std::exp(log_laplace_csbp(mech, x, t, theta));
}

double laplace_immigration(const BranchingMechanism& mech, double x, int n, double t,
                           double theta) {
  return std::exp(log_laplace_immigration(mech, x, n, t, theta));
}

double laplace_die_by_T(const BranchingMechanism& mech, double T, double x, double t,
                        double theta) {
  return std::exp(log_laplace_die_by_T(mech, T, x, t, theta));
}

double gamma_T_survival(const BranchingMechanism& mech, double T, double t) {
  if (!(t >= 0.0 && t < T)) throw DomainError("gamma_T_survival: need 0 <= t < T");
  if (t == 0.0) return 1.0;
  require_grey(mech);
  const Frame fr = frame_above_root(mech);
  const double xT = excess_infinity(fr, T);
  const double xTt = excess_infinity(fr, T - t);
  const double a = psi(fr.m, xT) / (fr.shift + xT);
  const double b = psi(fr.m, xTt) / (fr.shift + xTt);
  return a / b;
}

HorizonGrid horizon_grid(double T, double horizon, double dt) {
  if (!(T > 0.0) || !(horizon >= 0.0) || !(dt > 0.0)) {
    throw DomainError("horizon_grid: need T > 0, horizon >= 0, dt > 0");
  }
  HorizonGrid g;
  g.delta_min = 1e-4 * T;
  double end = horizon;
  if (end > T - g.delta_min) {
    end = T - g.delta_min;
    g.truncated = true;
  }
  double s = 0.0;
  g.s.push_back(s);
  while (end - s > 1e-12 * T) {
    const double h = std::min(dt, (T - s) / 20.0);
    s = std::min(s + h, end);
    if (end - s <= 1e-12 * T) s = end;
    g.s.push_back(s);
  }
  return g;
}

TimeSkeletonSchedule::TimeSkeletonSchedule(const BranchingMechanism& mech, double T,
                                           std::vector<double> grid, bool truncated, int k_max)
    : mech_(mech), T_(T), s_(std::move(grid)), truncated_(truncated) {
  if (s_.empty()) throw DomainError("time_schedule: empty grid");
  for (std::size_t i = 0; i < s_.size(); ++i) {
    if (s_[i] < 0.0 || s_[i] >= T || (i > 0 && s_[i] <= s_[i - 1])) {
      throw DomainError("time_schedule: grid must be increasing within [0, T)");
    }
  }
  require_grey(mech);
  const Frame fr = frame_above_root(mech);
  const std::size_t n = s_.size();

  // Excess x(tau) over the shift at tau = T - s, flowing forward in tau.
  std::vector<double> taus(n);
  for (std::size_t i = 0; i < n; ++i) taus[i] = T - s_[n - 1 - i];
  std::vector<double> xs;
  xs.reserve(n);
  double lx = std::log(excess_infinity(fr, taus.front()));
  if (n == 1) {
    xs.push_back(std::exp(lx));
  } else {
    auto rhs = [&](const double& y, double& dydt, double) {
      const double x = std::exp(y);
      dydt = -psi(fr.m, x) / x;
    };
    try {
      odeint::integrate_times(
          odeint::make_dense_output(kAbsTol, kRelTol, odeint::runge_kutta_dopri5<double>()), rhs,
          lx, taus.begin(), taus.end(), 1e-6 * taus.front(),
          [&](const double& v, double) { xs.push_back(std::exp(v)); });
    } catch (const std::exception& e) {
      throw NumericalError(std::string("time_schedule: ODE solver failed: ") + e.what());
    }
    const double check = excess_infinity(fr, taus.back());
    if (std::abs(check - xs.back()) > 1e-8 * check) {
      throw NumericalError("time_schedule: flowed u_T(inf) disagrees with direct solve");
    }
  }
  u_.resize(n);
  du_.resize(n);
  rate_.resize(n);
  tail_.resize(n);
  probs_.assign(n, std::vector<double>(static_cast<std::size_t>(k_max) + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = xs[n - 1 - i];
    const double u = fr.shift + xi;
    u_[i] = u;
    du_[i] = psi(fr.m, xi);
    const double num = prolific_numerator(mech, u);
    rate_[i] = num / u;
    double jump = 0.0;
    for (int k = 2; k <= k_max; ++k) {
      const double w = mech.levy().poisson_weight(k, u);
      jump += w;
      probs_[i][static_cast<std::size_t>(k)] = w / num;
    }
    probs_[i][2] += mech.beta() * u * u / num;
    tail_[i] = (mech.levy().prolific_weight(u) - jump) / num;
  }
}

double TimeSkeletonSchedule::u_at(double s) const {
  if (s <= s_.front()) return u_.front();
  if (s > s_.back() * (1.0 + 1e-12) + 1e-15) {
    throw DomainError("TimeSkeletonSchedule: s beyond the schedule grid");
  }
  auto it = std::upper_bound(s_.begin(), s_.end(), s);
  if (it == s_.end()) return u_.back();
  const std::size_t j = static_cast<std::size_t>(it - s_.begin());
  const std::size_t i = j - 1;
  const double h = s_[j] - s_[i];
  const double z = (s - s_[i]) / h;
  const double z2 = z * z;
  const double z3 = z2 * z;
  const double h00 = 2 * z3 - 3 * z2 + 1;
  const double h10 = z3 - 2 * z2 + z;
  const double h01 = -2 * z3 + 3 * z2;
  const double h11 = z3 - z2;
  return h00 * u_[i] + h10 * h * du_[i] + h01 * u_[j] + h11 * h * du_[j];
}

double TimeSkeletonSchedule::rate_at(double s) const {
  const double u = u_at(s);
  return prolific_numerator(mech_, u) / u;
}

void TimeSkeletonSchedule::write_csv(std::ostream& os, int k_columns) const {
  std::vector<std::string> header{"s", "T_minus_s", "u_inf", "rate"};
  const int kmax = std::min<int>(k_columns, static_cast<int>(probs_.front().size()) - 1);
  for (int k = 2; k <= kmax; ++k) header.push_back("p" + std::to_string(k));
  header.push_back("tail");
  CsvWriter w(os, header);
  for (std::size_t i = 0; i < s_.size(); ++i) {
    w << s_[i] << (T_ - s_[i]) << u_[i] << rate_[i];
    for (int k = 2; k <= kmax; ++k) w << probs_[i][static_cast<std::size_t>(k)];
    w << tail_[i];
    w.end_row();
  }
}

TimeSkeletonSchedule time_schedule(const BranchingMechanism& mech, double T,
                                   const HorizonGrid& grid, int k_max) {
  return TimeSkeletonSchedule(mech, T, grid.s, grid.truncated, k_max);
}

}  // namespace csbp
