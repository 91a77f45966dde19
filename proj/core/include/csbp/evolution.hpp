#pragma once

#include <iosfwd>
#include <vector>

#include "csbp/mechanism.hpp"

namespace csbp {

/// u_t(theta) on a time grid: du/dt = -psi(u), u_0 = theta.
///
/// `du_dtheta` holds exp(-\int_0^t psi'(u_r) dr) and `int_phi0` holds
/// \int_0^t phi_0(u_r) dr; both ride along with u in the same ODE system.
/// theta may be +infinity, in which case u[i] = u_{t_i}(inf).
struct EvolutionTable {
  double theta = 0.0;
  std::vector<double> times;
  std::vector<double> u;
  std::vector<double> du_dtheta;
  std::vector<double> int_phi0;
  double tol = 0.0;

  void write_csv(std::ostream& os, bool with_derivative = false) const;
};

EvolutionTable solve_u(const BranchingMechanism& mech, double theta,
                       const std::vector<double>& times);

/// u_t(theta) at a single time.
double u_at(const BranchingMechanism& mech, double theta, double t);

/// u_t(inf), the exponent of P_x(X_t = 0) = e^{-x u_t(inf)}. Requires Grey's condition.
double u_infinity(const BranchingMechanism& mech, double t);

/// V^T_t(theta) = u_t(theta + u_{T-t}(inf)) - u_T(inf).
double v_exponent(const BranchingMechanism& mech, double T, double t, double theta);

/// d u_t(theta) / d theta.
double du_dtheta(const BranchingMechanism& mech, double theta, double t);

double log_laplace_csbp(const BranchingMechanism& mech, double x, double t, double theta);
double log_laplace_immigration(const BranchingMechanism& mech, double x, int n, double t,
                               double theta);
double log_laplace_die_by_T(const BranchingMechanism& mech, double T, double x, double t,
                            double theta);

/// E_x[e^{-theta X_t}].
double laplace_csbp(const BranchingMechanism& mech, double x, double t, double theta);
/// Same for the process with n immortal immigrating lines (n = 1 is the spine).
double laplace_immigration(const BranchingMechanism& mech, double x, int n, double t,
                           double theta);
/// Same for the process conditioned to be extinct by time T.
double laplace_die_by_T(const BranchingMechanism& mech, double T, double x, double t,
                        double theta);

/// Probability that the first T-skeleton individual has not branched by time t.
double gamma_T_survival(const BranchingMechanism& mech, double T, double t);

/// s-grid on [0, horizon] with steps min(dt, (T - s) / 20), ending at most at
/// T - 1e-4 T. `truncated` reports whether the horizon had to be pulled in.
struct HorizonGrid {
  std::vector<double> s;
  bool truncated = false;
  double delta_min = 0.0;
};
HorizonGrid horizon_grid(double T, double horizon, double dt);

/// Branching data of the T-skeleton along an s-grid.
class TimeSkeletonSchedule {
 public:
  TimeSkeletonSchedule(const BranchingMechanism& mech, double T, std::vector<double> grid,
                       bool truncated, int k_max);

  double horizon_T() const { return T_; }
  const std::vector<double>& s() const { return s_; }
  /// u_{T-s}(inf) at the grid nodes.
  const std::vector<double>& u() const { return u_; }
  const std::vector<double>& rate() const { return rate_; }
  /// probs()[i][k] = p_k^{T-s_i}, k = 0..K_max; tail()[i] is the remainder.
  const std::vector<std::vector<double>>& probs() const { return probs_; }
  const std::vector<double>& tail() const { return tail_; }
  bool truncated() const { return truncated_; }
  const BranchingMechanism& mechanism() const { return mech_; }

  /// u_{T-s}(inf) between nodes (cubic Hermite; dU/ds = psi(U)).
  double u_at(double s) const;
  double rate_at(double s) const;

  void write_csv(std::ostream& os, int k_columns = 6) const;

 private:
  BranchingMechanism mech_;
  double T_;
  std::vector<double> s_, u_, du_, rate_, tail_;
  std::vector<std::vector<double>> probs_;
  bool truncated_;
};

TimeSkeletonSchedule time_schedule(const BranchingMechanism& mech, double T,
                                   const HorizonGrid& grid, int k_max = 64);

}  // namespace csbp
