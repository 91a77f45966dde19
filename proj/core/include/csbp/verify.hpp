#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "csbp/mechanism.hpp"

namespace csbp {

/// One compared quantity. The verdict is z <= threshold with
/// z = |estimate - oracle| / (se + bias).
struct Assertion {
  std::string statistic;
  double oracle = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double bias = 0.0;
  double z = 0.0;
  double threshold = 4.0;
  bool pass = false;
};

Assertion make_assertion(std::string statistic, double oracle, double estimate, double se,
                         double bias, double threshold = 4.0);
/// Deterministic comparison: passes iff |estimate - oracle| <= tol * max(1, |oracle|).
Assertion make_identity(std::string statistic, double oracle, double estimate, double tol);

struct VerificationReport {
  std::string test_name;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  std::vector<Assertion> assertions;
  /// Informational notes (degenerate samples and the like); they do not change the verdict.
  std::vector<std::string> flags;

  explicit VerificationReport(std::string name = {}) : test_name(std::move(name)) {}

  void add(Assertion a) { assertions.push_back(std::move(a)); }
  void append(const VerificationReport& other);
  bool passed() const;
  std::string inputs_digest() const;
  nlohmann::ordered_json to_json() const;
  std::string text_table() const;
};

struct ReportBundle {
  std::string suite;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<VerificationReport> reports;

  bool passed() const;
  nlohmann::ordered_json to_json() const;
  std::string text_table() const;
};

// ---- analytic identities -------------------------------------------------

/// psi'(l) + alpha - 2 beta l against the integral of (1 - e^{-l r}) r Pi(dr).
VerificationReport check_thinning_identity(const BranchingMechanism& mech,
                                           const std::vector<double>& lambdas,
                                           double tol = 1e-10);

/// Coefficients of the joint (Lambda, Z) Laplace PDE.
struct PdeCoefficients {
  double A = 0.0;
  double B = 0.0;
};
PdeCoefficients pde_coefficients(const BranchingMechanism& mech, double lambda, double eta,
                                 double theta);

/// -psi(kappa) = A + lambda e^{-theta} B with kappa = eta + lambda (1 - e^{-theta}).
VerificationReport check_pde_coefficients(const BranchingMechanism& mech, double lambda,
                                          const std::vector<std::pair<double, double>>& grid,
                                          double tol = 1e-8);

/// Pointwise tilt identity and tilt composition on a theta grid.
VerificationReport check_esscher(const BranchingMechanism& mech, double lambda, double mu,
                                 const std::vector<double>& thetas, double tol = 1e-10);

/// u_{t+s}(theta) = u_t(u_s(theta)).
VerificationReport check_semigroup(const BranchingMechanism& mech,
                                   const std::vector<double>& thetas,
                                   const std::vector<std::pair<double, double>>& st,
                                   double tol = 1e-8);

/// q (sum_k p_k r^k - r) = psi(lambda (1 - r)) / lambda at the given r.
VerificationReport check_generating_function(const BranchingMechanism& mech, double lambda,
                                             const std::vector<double>& rs, double tol = 1e-8);

/// e^{-alpha t} du/dtheta e^{-x u} against the spine immigration Laplace oracle.
VerificationReport check_spine_oracle(const BranchingMechanism& mech, double x,
                                      const std::vector<double>& thetas,
                                      const std::vector<double>& times, double tol = 1e-7);

// ---- Monte Carlo comparisons --------------------------------------------

using LaplaceOracle = std::function<double(double theta)>;

/// Mean of e^{-theta m} over the samples against the oracle at each theta.
VerificationReport test_marginal_laplace(const std::vector<double>& samples,
                                         const LaplaceOracle& oracle,
                                         const std::vector<double>& theta_grid,
                                         double bias_allowance, double threshold = 4.0);

/// Paired comparison of e^{-eta L - theta Z} with e^{-(eta + tilt (1 - e^{-theta})) L}.
VerificationReport test_joint_poissonization(const std::vector<double>& lambda_mass,
                                             const std::vector<std::int64_t>& z_count,
                                             double tilt,
                                             const std::vector<std::pair<double, double>>& grid,
                                             double bias_allowance, double threshold = 4.0);

/// Within deciles of L, compares E[Z] with E[tilt L] and E[Z(Z-1)] with
/// E[(tilt L)^2], which is what a conditionally Poisson(tilt L) count satisfies.
VerificationReport test_poisson_dispersion(const std::vector<double>& lambda_mass,
                                           const std::vector<std::int64_t>& z_count,
                                           double tilt, double bias_rel,
                                           double threshold = 5.0);

/// Sample mean against x e^{alpha t}. The bias allowance covers the Euler
/// mean recursion x (1 + alpha dt)^n plus one dt of slack; dt = 0 means exact.
VerificationReport test_mean_growth(const std::vector<double>& samples, double x,
                                    const BranchingMechanism& mech, double t, double dt);

/// Frequency of absorption by the horizon against e^{-x u_H(inf)}.
VerificationReport test_extinction(const std::vector<double>& extinct, const BranchingMechanism& mech,
                                   double x, double horizon, double bias_allowance);

// ---- suites -------------------------------------------------------------

struct SuiteConfig {
  std::uint64_t seed = 20240917;
  /// Paths per Monte Carlo test; 0 keeps each suite's default.
  std::size_t N = 0;
  double dt = 1e-3;
  /// Worker threads; 0 means hardware concurrency. Never affects results.
  unsigned threads = 0;
  /// Replaces the default mechanisms of the identities suite.
  std::optional<BranchingMechanism> mechanism;
};

std::vector<std::string> suite_names();
ReportBundle run_suite(const std::string& name, const SuiteConfig& cfg);

}  // namespace csbp
