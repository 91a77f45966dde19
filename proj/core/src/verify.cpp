#include "csbp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "csbp/errors.hpp"
#include "csbp/evolution.hpp"
#include "csbp/io.hpp"
#include "csbp/stats.hpp"

namespace csbp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

Assertion make_assertion(std::string statistic, double oracle, double estimate, double se,
                         double bias, double threshold) {
  Assertion a;
  a.statistic = std::move(statistic);
  a.oracle = oracle;
  a.estimate = estimate;
  a.se = se;
  a.bias = bias;
  a.threshold = threshold;
  const double diff = std::abs(estimate - oracle);
  const double scale = se + bias;
  if (std::isnan(diff) || std::isnan(scale)) {
    a.z = std::numeric_limits<double>::quiet_NaN();
  } else if (scale > 0.0) {
    a.z = diff / scale;
  } else {
    a.z = diff == 0.0 ? 0.0 : kInf;
  }
  a.pass = a.z <= threshold;
  return a;
}

Assertion make_identity(std::string statistic, double oracle, double estimate, double tol) {
  return make_assertion(std::move(statistic), oracle, estimate, 0.0,
                        tol * std::max(1.0, std::abs(oracle)), 1.0);
}

void VerificationReport::append(const VerificationReport& other) {
  for (const auto& a : other.assertions) {
    Assertion b = a;
    b.statistic = other.test_name + ": " + a.statistic;
    assertions.push_back(std::move(b));
  }
  flags.insert(flags.end(), other.flags.begin(), other.flags.end());
}

bool VerificationReport::passed() const {
  return std::all_of(assertions.begin(), assertions.end(),
                     [](const Assertion& a) { return a.pass; });
}

std::string VerificationReport::inputs_digest() const { return fnv1a_hex(inputs.dump()); }

nlohmann::ordered_json VerificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["test_name"] = test_name;
  j["inputs"] = inputs;
  j["inputs_digest"] = inputs_digest();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& a : assertions) {
    nlohmann::ordered_json r;
    r["statistic"] = a.statistic;
    r["oracle"] = number_or_null(a.oracle);
    r["estimate"] = number_or_null(a.estimate);
    r["se"] = number_or_null(a.se);
    r["bias_allowance"] = number_or_null(a.bias);
    r["z_score"] = number_or_null(a.z);
    r["threshold"] = a.threshold;
    r["verdict"] = a.pass ? "pass" : "fail";
    arr.push_back(std::move(r));
  }
  j["assertions"] = std::move(arr);
  j["flags"] = flags;
  j["verdict"] = passed() ? "pass" : "fail";
  return j;
}

std::string VerificationReport::text_table() const {
  std::ostringstream os;
  os << "== " << test_name << " [" << (passed() ? "PASS" : "FAIL") << "]\n";
  char line[256];
  std::snprintf(line, sizeof line, "  %-44s %14s %14s %11s %11s %9s  %s\n", "statistic", "oracle",
                "estimate", "se", "bias", "z", "verdict");
  os << line;
  for (const auto& a : assertions) {
    std::snprintf(line, sizeof line, "  %-44s %14s %14s %11s %11s %9s  %s\n",
                  a.statistic.c_str(), fmt(a.oracle).c_str(), fmt(a.estimate).c_str(),
                  fmt(a.se).c_str(), fmt(a.bias).c_str(), fmt(a.z).c_str(),
                  a.pass ? "pass" : "FAIL");
    os << line;
  }
  for (const auto& f : flags) os << "  note: " << f << '\n';
  return os.str();
}

bool ReportBundle::passed() const {
  return std::all_of(reports.begin(), reports.end(),
                     [](const VerificationReport& r) { return r.passed(); });
}

nlohmann::ordered_json ReportBundle::to_json() const {
  nlohmann::ordered_json j;
  j["suite"] = suite;
  j["library_version"] = CSBP_VERSION;
  j["config"] = config;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(r.to_json());
  j["reports"] = std::move(arr);
  j["verdict"] = passed() ? "pass" : "fail";
  return j;
}

std::string ReportBundle::text_table() const {
  std::string out = "suite " + suite + ": " + (passed() ? "PASS" : "FAIL") + "\n";
  for (const auto& r : reports) out += r.text_table();
  return out;
}

// ---------------------------------------------------------------------------

VerificationReport check_thinning_identity(const BranchingMechanism& mech,
                                           const std::vector<double>& lambdas, double tol) {
  VerificationReport rep("thinning_identity");
  rep.inputs["mechanism"] = mech.to_json();
  rep.inputs["lambdas"] = lambdas;
  rep.inputs["tol"] = tol;
  for (double l : lambdas) {
    const double lhs = psi_prime(mech, l) + mech.alpha() - 2.0 * mech.beta() * l;
    // Generic quadrature on purpose: the closed forms inside psi_prime are what is checked.
    const double rhs = mech.levy().integrate([l](double r) { return -std::expm1(-l * r) * r; });
    rep.add(make_identity("lambda=" + format_double(l), rhs, lhs, tol));
  }
  return rep;
}

PdeCoefficients pde_coefficients(const BranchingMechanism& mech, double lambda, double eta,
                                 double theta) {
  if (!(lambda > 0.0)) throw DomainError("pde_coefficients: lambda must be > 0");
  if (!(eta >= 0.0) || !(theta >= 0.0)) throw DomainError("pde_coefficients: need eta, theta >= 0");
  const LevyMeasure& pi = mech.levy();
  const double beta = mech.beta();
  PdeCoefficients c;
  c.A = eta * (-psi_prime(mech, lambda) - eta * beta) -
        pi.integrate([=](double r) {
          const double x = eta * r;
          const double core = x < 1e-3 ? x * x * (0.5 - x / 6.0 + x * x / 24.0)
                                       : std::expm1(-x) + x;
          return core * std::exp(-lambda * r);
        });

  // Terms of the k-sum in B.
  const double k0 = std::expm1(theta) * psi(mech, lambda) / lambda;
  const double k2_atom = std::expm1(-theta) * beta * lambda;
  const double k1 = pi.integrate([=](double r) { return std::expm1(-eta * r) * r * std::exp(-lambda * r); });
  double k_ge2 = 0.0;
  if (!pi.is_none() && (eta > 0.0 || theta > 0.0)) {
    // \int (lambda r)^k / k! e^{-(lambda + eta) r} Pi(dr) = rho0^k w_k(lambda + eta),
    // summed against e^{-theta (k - 1)}; the -1 part sums in closed form.
    const double s = lambda + eta;
    const double rho = std::exp(-theta) * lambda / s;
    const double bound_scale = pi.prolific_weight(s);
    NeumaierSum acc;
    double rho_k = rho * rho;
    for (int k = 2;; ++k) {
      const double term = rho_k * pi.poisson_weight(k, s);
      acc.add(term);
      if (rho_k * bound_scale <= 1e-18 * std::abs(acc.value()) || rho_k * bound_scale < 1e-300) break;
      if (k > 200000) throw NumericalError("pde_coefficients: offspring series did not converge");
      rho_k *= rho;
    }
    k_ge2 = (std::exp(theta) * acc.value() - pi.prolific_weight(lambda)) / lambda;
  }
  c.B = 2.0 * eta * beta - (k0 + k2_atom + k1 + k_ge2);
  return c;
}

VerificationReport check_pde_coefficients(const BranchingMechanism& mech, double lambda,
                                          const std::vector<std::pair<double, double>>& grid,
                                          double tol) {
  if (classify(mech) == Criticality::Supercritical && lambda < lambda_star(mech) * (1 - 1e-12)) {
    throw DomainError("check_pde_coefficients: lambda below lambda*");
  }
  VerificationReport rep("pde_coefficients");
  rep.inputs["mechanism"] = mech.to_json();
  rep.inputs["lambda"] = lambda;
  auto g = nlohmann::ordered_json::array();
  for (auto [e, t] : grid) g.push_back({e, t});
  rep.inputs["grid"] = std::move(g);
  rep.inputs["tol"] = tol;
  for (auto [eta, theta] : grid) {
    const double kappa = eta - lambda * std::expm1(-theta);
    const PdeCoefficients c = pde_coefficients(mech, lambda, eta, theta);
    const double rhs = c.A + lambda * std::exp(-theta) * c.B;
    rep.add(make_identity("eta=" + format_double(eta) + ",theta=" + format_double(theta),
                          -psi(mech, kappa), rhs, tol));
  }
  return rep;
}

VerificationReport check_esscher(const BranchingMechanism& mech, double lambda, double mu,
                                 const std::vector<double>& thetas, double tol) {
  VerificationReport rep("esscher");
  rep.inputs["mechanism"] = mech.to_json();
  rep.inputs["lambda"] = lambda;
  rep.inputs["mu"] = mu;
  rep.inputs["thetas"] = thetas;
  rep.inputs["tol"] = tol;
  const BranchingMechanism e = esscher(mech, lambda);
  const BranchingMechanism ee = esscher(e, mu);
  const BranchingMechanism e2 = esscher(mech, lambda + mu);
  const double base = psi(mech, lambda);
  for (double th : thetas) {
    rep.add(make_identity("pointwise theta=" + format_double(th), psi(mech, th + lambda) - base,
                          psi(e, th), tol));
    rep.add(make_identity("composition theta=" + format_double(th), psi(e2, th), psi(ee, th), tol));
  }
  return rep;
}

VerificationReport check_semigroup(const BranchingMechanism& mech,
                                   const std::vector<double>& thetas,
                                   const std::vector<std::pair<double, double>>& st, double tol) {
  VerificationReport rep("semigroup");
  rep.inputs["mechanism"] = mech.to_json();
  rep.inputs["thetas"] = thetas;
  auto g = nlohmann::ordered_json::array();
  for (auto [s, t] : st) g.push_back({s, t});
  rep.inputs["s_t"] = std::move(g);
  rep.inputs["tol"] = tol;
  for (double th : thetas) {
    for (auto [s, t] : st) {
      const double direct = u_at(mech, th, s + t);
      const double composed = u_at(mech, u_at(mech, th, s), t);
      // Relative check: u can be far below 1 at long times.
      rep.add(make_assertion("theta=" + format_double(th) + ",s=" + format_double(s) +
                                 ",t=" + format_double(t),
                             direct, composed, 0.0, tol * std::abs(direct), 1.0));
    }
  }
  if (classify(mech) == Criticality::Supercritical) {
    const double ls = lambda_star(mech);
    for (double t : {0.5, 2.0, 10.0}) {
      rep.add(make_identity("fixed point t=" + format_double(t), ls, u_at(mech, ls, t), 1e-10));
    }
  }
  return rep;
}

VerificationReport check_generating_function(const BranchingMechanism& mech, double lambda,
                                             const std::vector<double>& rs, double tol) {
  VerificationReport rep("generating_function");
  rep.inputs["mechanism"] = mech.to_json();
  rep.inputs["lambda"] = lambda;
  rep.inputs["r"] = rs;
  rep.inputs["tol"] = tol;
  OffspringLaw law;
  for (int k_max = 64;; k_max *= 2) {
    try {
      law = skeleton_params(mech, lambda, k_max);
      break;
    } catch (const DomainError&) {
      if (k_max >= 8192) throw;
    }
  }
  rep.inputs["k_max"] = law.probs.size() - 1;
  for (double r : rs) {
    NeumaierSum g;
    double rk = 1.0;
    for (double p : law.probs) {
      g.add(p * rk);
      rk *= r;
    }
    const double lhs = law.rate * (g.value() - r);
    const double rhs = psi(mech, lambda * (1.0 - r)) / lambda;
    rep.add(make_identity("r=" + format_double(r), rhs, lhs, tol));
  }
  return rep;
}

VerificationReport check_spine_oracle(const BranchingMechanism& mech, double x,
                                      const std::vector<double>& thetas,
                                      const std::vector<double>& times, double tol) {
  if (classify(mech) == Criticality::Supercritical) {
    throw DomainError("check_spine_oracle: mechanism must not be supercritical");
  }
  VerificationReport rep("spine_oracle");
  rep.inputs["mechanism"] = mech.to_json();
  rep.inputs["x"] = x;
  rep.inputs["thetas"] = thetas;
  rep.inputs["times"] = times;
  rep.inputs["tol"] = tol;
  for (double th : thetas) {
    for (double t : times) {
      // Doob h-transform with h(x) = x e^{-alpha t} against the immigration form.
      const double u = u_at(mech, th, t);
      const double h_form = std::exp(-mech.alpha() * t) * du_dtheta(mech, th, t) * std::exp(-x * u);
      const double imm = laplace_immigration(mech, x, 1, t, th);
      rep.add(make_assertion("theta=" + format_double(th) + ",t=" + format_double(t), imm,
                             h_form, 0.0, tol * std::abs(imm), 1.0));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

VerificationReport test_marginal_laplace(const std::vector<double>& samples,
                                         const LaplaceOracle& oracle,
                                         const std::vector<double>& theta_grid,
                                         double bias_allowance, double threshold) {
  if (samples.size() < 2) throw DomainError("test_marginal_laplace: need at least 2 samples");
  VerificationReport rep("marginal_laplace");
  rep.inputs["N"] = samples.size();
  rep.inputs["theta_grid"] = theta_grid;
  rep.inputs["bias_allowance"] = bias_allowance;
  if (std::all_of(samples.begin(), samples.end(), [&](double v) { return v == samples.front(); })) {
    rep.flags.push_back("degenerate sample: all values equal " + format_double(samples.front()));
  }
  std::vector<double> f(samples.size());
  for (double th : theta_grid) {
    for (std::size_t i = 0; i < samples.size(); ++i) f[i] = std::exp(-th * samples[i]);
    const MeanSe m = mean_se(f);
    rep.add(make_assertion("E exp(-" + format_double(th) + " X)", oracle(th), m.mean, m.se,
                           bias_allowance, threshold));
  }
  return rep;
}

VerificationReport test_joint_poissonization(const std::vector<double>& lambda_mass,
                                             const std::vector<std::int64_t>& z_count,
                                             double tilt,
                                             const std::vector<std::pair<double, double>>& grid,
                                             double bias_allowance, double threshold) {
  if (lambda_mass.size() != z_count.size() || lambda_mass.size() < 2) {
    throw DomainError("test_joint_poissonization: need matching samples, N >= 2");
  }
  const std::size_t n = lambda_mass.size();
  VerificationReport rep("joint_poissonization");
  rep.inputs["N"] = n;
  rep.inputs["tilt"] = tilt;
  auto g = nlohmann::ordered_json::array();
  for (auto [e, t] : grid) g.push_back({e, t});
  rep.inputs["grid"] = std::move(g);
  rep.inputs["bias_allowance"] = bias_allowance;
  std::vector<double> joint(n), tilted(n);
  for (auto [eta, theta] : grid) {
    const double kappa = eta - tilt * std::expm1(-theta);
    for (std::size_t i = 0; i < n; ++i) {
      joint[i] = std::exp(-eta * lambda_mass[i] - theta * static_cast<double>(z_count[i]));
      tilted[i] = std::exp(-kappa * lambda_mass[i]);
    }
    const MeanSe d = paired_difference(joint, tilted);
    const MeanSe b = mean_se(tilted);
    rep.add(make_assertion("eta=" + format_double(eta) + ",theta=" + format_double(theta),
                           b.mean, b.mean + d.mean, d.se, bias_allowance, threshold));
  }
  return rep;
}

VerificationReport test_poisson_dispersion(const std::vector<double>& lambda_mass,
                                           const std::vector<std::int64_t>& z_count,
                                           double tilt, double bias_rel, double threshold) {
  const std::size_t n = lambda_mass.size();
  if (z_count.size() != n || n < 100) {
    throw DomainError("test_poisson_dispersion: need matching samples, N >= 100");
  }
  VerificationReport rep("poisson_dispersion");
  rep.inputs["N"] = n;
  rep.inputs["tilt"] = tilt;
  rep.inputs["bins"] = 10;
  rep.inputs["bias_rel"] = bias_rel;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lambda_mass[a] < lambda_mass[b]; });
  for (std::size_t bin = 0; bin < 10; ++bin) {
    const std::size_t lo = bin * n / 10;
    const std::size_t hi = (bin + 1) * n / 10;
    std::vector<double> z, mu, zf, mu2;
    for (std::size_t j = lo; j < hi; ++j) {
      const std::size_t i = order[j];
      const double zi = static_cast<double>(z_count[i]);
      const double m = tilt * lambda_mass[i];
      z.push_back(zi);
      mu.push_back(m);
      zf.push_back(zi * (zi - 1.0));
      mu2.push_back(m * m);
    }
    const MeanSe d1 = paired_difference(z, mu);
    const MeanSe m1 = mean_se(mu);
    const MeanSe d2 = paired_difference(zf, mu2);
    const MeanSe m2 = mean_se(mu2);
    const std::string tag = "decile " + std::to_string(bin + 1);
    rep.add(make_assertion(tag + " E[Z]", m1.mean, m1.mean + d1.mean, d1.se,
                           bias_rel * std::max(1.0, m1.mean), threshold));
    rep.add(make_assertion(tag + " E[Z(Z-1)]", m2.mean, m2.mean + d2.mean, d2.se,
                           bias_rel * std::max(1.0, m2.mean), threshold));
  }
  return rep;
}

VerificationReport test_mean_growth(const std::vector<double>& samples, double x,
                                    const BranchingMechanism& mech, double t, double dt) {
  VerificationReport rep("mean_growth");
  rep.inputs["N"] = samples.size();
  rep.inputs["x"] = x;
  rep.inputs["t"] = t;
  rep.inputs["dt"] = dt;
  const double a = mech.alpha();
  const double oracle = x * std::exp(a * t);
  double bias = 0.0;
  if (dt > 0.0) {
    const double steps = std::ceil(t / dt - 1e-9);
    bias = std::abs(oracle - x * std::pow(1.0 + a * dt, steps)) + dt * x * std::exp(std::abs(a) * t);
  }
  const MeanSe m = mean_se(samples);
  rep.add(make_assertion("E X_t", oracle, m.mean, m.se, bias));
  return rep;
}

VerificationReport test_extinction(const std::vector<double>& extinct,
                                   const BranchingMechanism& mech, double x, double horizon,
                                   double bias_allowance) {
  VerificationReport rep("extinction");
  rep.inputs["N"] = extinct.size();
  rep.inputs["x"] = x;
  rep.inputs["horizon"] = horizon;
  rep.inputs["bias_allowance"] = bias_allowance;
  const double limit = std::exp(-lambda_star(mech) * x);
  const double by_horizon = std::exp(-x * u_infinity(mech, horizon));
  rep.inputs["limit_probability"] = limit;
  rep.inputs["horizon_residual"] = limit - by_horizon;
  const MeanSe m = mean_se(extinct);
  rep.add(make_assertion("P(extinct by H)", by_horizon, m.mean, m.se, bias_allowance));
  return rep;
}

}  // namespace csbp
