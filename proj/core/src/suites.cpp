#include <cmath>
#include <map>

#include "csbp/errors.hpp"
#include "csbp/evolution.hpp"
#include "csbp/io.hpp"
#include "csbp/levy.hpp"
#include "csbp/parallel.hpp"
#include "csbp/rng.hpp"
#include "csbp/simulate.hpp"
#include "csbp/skeleton.hpp"
#include "csbp/stats.hpp"
#include "csbp/verify.hpp"

namespace csbp {

namespace {

const std::vector<double> kThetas{0.5, 1.0, 2.0};

BranchingMechanism feller_super() { return BranchingMechanism::feller(1.0, 1.0); }
BranchingMechanism feller_sub() { return BranchingMechanism::feller(-1.0, 1.0); }
BranchingMechanism exp_jumps() { return {1.0, 0.5, LevyMeasure::exponential(1.0, 1.0)}; }

std::vector<std::pair<double, double>> square_grid(const std::vector<double>& v) {
  std::vector<std::pair<double, double>> g;
  for (double a : v) {
    for (double b : v) g.emplace_back(a, b);
  }
  return g;
}

// Substream tags, one per independent Monte Carlo stream.
enum Tag : std::uint32_t {
  kExact = 0x100,
  kEulerSuper,
  kEulerExact,
  kEulerJumps,
  kSkelStar,
  kSkelDouble,
  kSkelJumps,
  kSkelCsbp,
  kTPoisson,
  kTZero,
  kTFirstBranch,
  kDieByT,
  kSpineSde,
  kSweep,
  kExtinct1,
  kExtinct3,
  kSelf,
};

struct Ctx {
  const SuiteConfig& cfg;
  std::size_t N;

  template <class T, class F>
  std::vector<T> collect(std::uint32_t tag, std::size_t n, F&& draw) const {
    std::vector<T> out(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      Rng rng(cfg.seed, substream_id(tag, i));
      out[i] = draw(rng);
    });
    return out;
  }

  nlohmann::ordered_json inputs(const BranchingMechanism& mech, std::size_t n,
                                std::uint32_t tag) const {
    nlohmann::ordered_json j;
    j["mechanism"] = mech.to_json();
    j["seed"] = cfg.seed;
    j["stream_tag"] = tag;
    j["N"] = n;
    j["dt"] = cfg.dt;
    return j;
  }
};

VerificationReport named(VerificationReport r, std::string name, nlohmann::ordered_json inputs) {
  r.test_name = std::move(name);
  for (auto& [k, v] : r.inputs.items()) inputs[k] = v;
  r.inputs = std::move(inputs);
  return r;
}

// ---------------------------------------------------------------------------

void identities_for(const BranchingMechanism& m, ReportBundle& out, const std::string& label) {
  const bool super = classify(m) == Criticality::Supercritical;
  const double ls = super ? lambda_star(m) : 0.0;
  const double lam = super ? ls : 1.0;
  auto tagged = [&](VerificationReport r) {
    r.test_name = label + "/" + r.test_name;
    out.reports.push_back(std::move(r));
  };
  tagged(check_thinning_identity(m, {ls, ls + 1.0, 5.0}));
  const auto pde_grid = square_grid({0.0, 0.25, 0.7, 1.0});
  tagged(check_pde_coefficients(m, lam, pde_grid));
  tagged(check_pde_coefficients(m, 2.0 * lam, pde_grid));
  tagged(check_esscher(m, super ? ls : 0.0, 0.5, {0.0, 0.1, 1.0, 5.0}));
  tagged(check_semigroup(m, {0.1, 1.0, 5.0}, {{0.3, 0.7}, {1.0, 1.0}, {0.5, 2.0}}));
  if (m.levy().is_stable()) {
    // The offspring law has a power tail here; no finite table is within 1e-10.
    VerificationReport note("generating_function");
    note.flags.push_back("skipped: offspring tail of a stable-type measure cannot be truncated");
    tagged(std::move(note));
  } else {
    tagged(check_generating_function(m, lam, {0.0, 0.3, 0.7, 1.0}));
  }
  if (!super) tagged(check_spine_oracle(m, 1.0, kThetas, {0.5, 1.0, 2.0}));
}

void suite_identities(const SuiteConfig& cfg, ReportBundle& out) {
  if (cfg.mechanism) {
    identities_for(*cfg.mechanism, out, "custom");
    return;
  }
  identities_for(feller_super(), out, "feller_super");
  identities_for(feller_sub(), out, "feller_sub");
  identities_for(exp_jumps(), out, "exp_jumps");
  identities_for(BranchingMechanism(0.5, 0.0, LevyMeasure::stable_tail(1.0, 1.5)), out,
                 "stable");
  identities_for(BranchingMechanism(0.5, 0.2, LevyMeasure::atoms({{1.0, 1.0}, {2.0, 0.5}})),
                 out, "atoms");
  identities_for(BranchingMechanism(-1.0, 0.5, LevyMeasure::exponential(1.0, 1.0)), out,
                 "exp_jumps_sub");
}

// Exact sampler against the closed-form oracles.
void suite_exact(const Ctx& c, ReportBundle& out) {
  const auto m = feller_super();
  const double x = 1.0, t = 1.0;
  const auto xs = c.collect<double>(kExact, c.N, [&](Rng& r) { return sample_feller_exact(m, x, t, r); });
  auto in = c.inputs(m, c.N, kExact);
  in["x"] = x;
  in["t"] = t;
  in["dt"] = 0.0;
  out.reports.push_back(named(
      test_marginal_laplace(xs, [&](double th) { return laplace_csbp(m, x, t, th); }, kThetas, 0.0),
      "exact/laplace", in));
  std::vector<double> zero(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) zero[i] = xs[i] == 0.0 ? 1.0 : 0.0;
  const MeanSe z = mean_se(zero);
  VerificationReport atom("exact/extinction_atom");
  atom.inputs = in;
  atom.add(make_assertion("P(X_t = 0)", std::exp(-x * u_infinity(m, t)), z.mean, z.se, 0.0));
  out.reports.push_back(std::move(atom));
  out.reports.push_back(named(test_mean_growth(xs, x, m, t, 0.0), "exact/mean", in));
}

// Euler scheme against the exact sampler and the oracles.
void suite_euler(const Ctx& c, ReportBundle& out) {
  const double x = 1.0, t = 1.0;
  PathConfig pc;
  pc.dt = c.cfg.dt;
  pc.horizon = t;
  const double bias = t * pc.dt;
  {
    const auto m = feller_super();
    const PathModel model = PathModel::csbp(m, pc);
    const auto xs = c.collect<double>(kEulerSuper, c.N, [&](Rng& r) { return model.run(x, r).final_mass(); });
    const std::size_t n_exact = 10 * c.N;
    const auto ex = c.collect<double>(kEulerExact, n_exact, [&](Rng& r) { return sample_feller_exact(m, x, t, r); });
    auto in = c.inputs(m, c.N, kEulerSuper);
    in["x"] = x;
    in["t"] = t;
    out.reports.push_back(named(
        test_marginal_laplace(xs, [&](double th) { return laplace_csbp(m, x, t, th); }, kThetas, bias),
        "euler/feller_super/laplace", in));
    VerificationReport rel("euler/feller_super/vs_exact_sampler");
    rel.inputs = in;
    rel.inputs["N_exact"] = n_exact;
    rel.inputs["exact_stream_tag"] = kEulerExact;
    rel.inputs["relative_tolerance"] = 0.005;
    std::vector<double> fe(xs.size()), fx(ex.size());
    for (double th : kThetas) {
      for (std::size_t i = 0; i < xs.size(); ++i) fe[i] = std::exp(-th * xs[i]);
      for (std::size_t i = 0; i < ex.size(); ++i) fx[i] = std::exp(-th * ex[i]);
      const double a = mean_se(fe).mean;
      const double b = mean_se(fx).mean;
      rel.add(make_assertion("E exp(-" + format_double(th) + " X) rel", b, a, 0.0,
                             0.005 * std::abs(b), 1.0));
    }
    out.reports.push_back(std::move(rel));
    out.reports.push_back(named(test_mean_growth(xs, x, m, t, pc.dt), "euler/feller_super/mean", in));
  }
  {
    const auto m = exp_jumps();
    const PathModel model = PathModel::csbp(m, pc);
    const auto xs = c.collect<double>(kEulerJumps, c.N, [&](Rng& r) { return model.run(x, r).final_mass(); });
    auto in = c.inputs(m, c.N, kEulerJumps);
    in["x"] = x;
    in["t"] = t;
    out.reports.push_back(named(
        test_marginal_laplace(xs, [&](double th) { return laplace_csbp(m, x, t, th); }, kThetas, bias),
        "euler/exp_jumps/laplace", in));
    out.reports.push_back(named(test_mean_growth(xs, x, m, t, pc.dt), "euler/exp_jumps/mean", in));
  }
}

struct Endpoint {
  double lambda = 0.0;
  std::int64_t z = 0;
  std::int64_t deaths = 0;
  double first_branch = 0.0;
};

void split(const std::vector<Endpoint>& e, std::vector<double>& l, std::vector<std::int64_t>& z) {
  l.resize(e.size());
  z.resize(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    l[i] = e[i].lambda;
    z[i] = e[i].z;
  }
}

// Returns the sampled Lambda_t values.
std::vector<double> lambda_skeleton_case(const Ctx& c, ReportBundle& out,
                                         const BranchingMechanism& m, double lambda,
                                         std::uint32_t tag, const std::string& label,
                                         bool with_dispersion) {
  const double x = 1.0, t = 1.0;
  PathConfig pc;
  pc.dt = c.cfg.dt;
  pc.horizon = t;
  const double bias = t * pc.dt;
  const LambdaSkeleton sk(m, lambda, pc);
  const InitialLaw init = InitialLaw::poisson(lambda * x);
  const auto ends = c.collect<Endpoint>(tag, c.N, [&](Rng& r) {
    const CoupledPath p = sk.run(x, init, r);
    return Endpoint{p.final_lambda(), p.final_z(), p.n_death, p.first_branch_time};
  });
  std::vector<double> l;
  std::vector<std::int64_t> z;
  split(ends, l, z);
  auto in = c.inputs(m, c.N, tag);
  in["lambda"] = lambda;
  in["x"] = x;
  in["t"] = t;
  in["initial"] = "Poisson(lambda x)";
  out.reports.push_back(named(
      test_marginal_laplace(l, [&](double th) { return laplace_csbp(m, x, t, th); }, kThetas, bias),
      label + "/marginal", in));
  out.reports.push_back(named(test_joint_poissonization(l, z, lambda, square_grid({0.25, 0.5, 1.0}), bias),
                              label + "/joint_poissonization", in));
  {
    // Joint Laplace at one point against the closed form e^{-x u_t(kappa)}.
    const double eta = 0.5, theta = 0.7;
    const double kappa = eta - lambda * std::expm1(-theta);
    std::vector<double> f(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
      f[i] = std::exp(-eta * l[i] - theta * static_cast<double>(z[i]));
    }
    const MeanSe ms = mean_se(f);
    VerificationReport r(label + "/joint_laplace_oracle");
    r.inputs = in;
    r.add(make_assertion("E exp(-0.5 L - 0.7 Z)", laplace_csbp(m, x, t, kappa), ms.mean, ms.se, bias));
    out.reports.push_back(std::move(r));
  }
  if (with_dispersion) {
    out.reports.push_back(named(test_poisson_dispersion(l, z, lambda, bias), label + "/dispersion", in));
  }
  if (std::abs(lambda - lambda_star(m)) <= 1e-12 * lambda) {
    std::int64_t deaths = 0;
    for (const auto& e : ends) deaths += e.deaths;
    VerificationReport r(label + "/no_death_at_lambda_star");
    r.inputs = in;
    r.add(make_identity("branch events with k = 0", 0.0, static_cast<double>(deaths), 0.0));
    out.reports.push_back(std::move(r));
  }
  return l;
}

void suite_theorem21(const Ctx& c, ReportBundle& out) {
  const auto fs = feller_super();
  const auto a = lambda_skeleton_case(c, out, fs, lambda_star(fs), kSkelStar,
                                      "lambda_skeleton/feller_super/lambda*", true);
  lambda_skeleton_case(c, out, fs, 2.0 * lambda_star(fs), kSkelDouble,
                       "lambda_skeleton/feller_super/2lambda*", false);
  const auto e1 = exp_jumps();
  lambda_skeleton_case(c, out, e1, lambda_star(e1), kSkelJumps, "lambda_skeleton/exp_jumps/lambda*", true);

  // Skeleton marginal against an independent Euler CSBP sample (two-sample test).
  const double x = 1.0, t = 1.0;
  PathConfig pc;
  pc.dt = c.cfg.dt;
  pc.horizon = t;
  const PathModel direct = PathModel::csbp(fs, pc);
  const auto b = c.collect<double>(kSkelCsbp, c.N, [&](Rng& r) { return direct.run(x, r).final_mass(); });
  VerificationReport r("lambda_skeleton/feller_super/vs_euler_csbp");
  r.inputs = c.inputs(fs, c.N, kSkelCsbp);
  r.inputs["x"] = x;
  r.inputs["t"] = t;
  std::vector<double> fa(a.size()), fb(b.size());
  for (double th : kThetas) {
    for (std::size_t i = 0; i < a.size(); ++i) fa[i] = std::exp(-th * a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) fb[i] = std::exp(-th * b[i]);
    const MeanSe ma = mean_se(fa);
    const MeanSe mb = mean_se(fb);
    r.add(make_assertion("theta=" + format_double(th), mb.mean, ma.mean,
                         std::hypot(ma.se, mb.se), 0.0));
  }
  out.reports.push_back(std::move(r));
}

void suite_theorem22(const Ctx& c, ReportBundle& out) {
  const auto m = feller_sub();
  const double T = 2.0, t = 1.0, x = 1.0;
  PathConfig pc;
  pc.dt = c.cfg.dt;
  pc.horizon = t;
  const double bias = t * pc.dt;
  const TSkeleton sk(m, T, pc);
  const double uT = u_infinity(m, T);
  const double tilt = u_infinity(m, T - t);
  {
    const auto ends = c.collect<Endpoint>(kTPoisson, c.N, [&](Rng& r) {
      const CoupledPath p = sk.run(x, InitialLaw::poisson(uT * x), r);
      return Endpoint{p.final_lambda(), p.final_z(), p.n_death, p.first_branch_time};
    });
    std::vector<double> l;
    std::vector<std::int64_t> z;
    split(ends, l, z);
    auto in = c.inputs(m, c.N, kTPoisson);
    in["T"] = T;
    in["t"] = t;
    in["x"] = x;
    in["initial"] = "Poisson(u_T(inf) x)";
    out.reports.push_back(named(
        test_marginal_laplace(l, [&](double th) { return laplace_csbp(m, x, t, th); }, kThetas, bias),
        "T_skeleton/marginal", in));
    out.reports.push_back(named(test_joint_poissonization(l, z, tilt, square_grid({0.25, 0.5, 1.0}), bias),
                                "T_skeleton/joint_poissonization", in));
  }
  {
    const auto l = c.collect<double>(kTZero, c.N, [&](Rng& r) {
      return sk.run(x, InitialLaw::fixed(0), r).final_lambda();
    });
    auto in = c.inputs(m, c.N, kTZero);
    in["T"] = T;
    in["t"] = t;
    in["x"] = x;
    in["initial"] = "Fixed(0)";
    out.reports.push_back(named(
        test_marginal_laplace(l, [&](double th) { return laplace_die_by_T(m, T, x, t, th); }, kThetas, bias),
        "T_skeleton/die_by_T", in));
  }
  {
    const auto first = c.collect<double>(kTFirstBranch, c.N, [&](Rng& r) {
      return sk.run(0.0, InitialLaw::fixed(1), r).first_branch_time > t ? 1.0 : 0.0;
    });
    const MeanSe ms = mean_se(first);
    VerificationReport r("T_skeleton/first_branch_survival");
    r.inputs = c.inputs(m, c.N, kTFirstBranch);
    r.inputs["T"] = T;
    r.inputs["t"] = t;
    r.inputs["initial"] = "Fixed(1), x = 0";
    r.add(make_assertion("P(first branch > t)", gamma_T_survival(m, T, t), ms.mean, ms.se, 0.0));
    out.reports.push_back(std::move(r));
  }
  {
    // The conditioned-to-die CSBP simulated directly.
    const PathModel die = PathModel::die_by_T(m, T, pc);
    const auto l = c.collect<double>(kDieByT, c.N, [&](Rng& r) { return die.run(x, r).final_mass(); });
    auto in = c.inputs(m, c.N, kDieByT);
    in["T"] = T;
    in["t"] = t;
    in["x"] = x;
    out.reports.push_back(named(
        test_marginal_laplace(l, [&](double th) { return laplace_die_by_T(m, T, x, t, th); }, kThetas, bias),
        "die_by_T_sde/laplace", in));
  }
}

void suite_theorem23(const Ctx& c, ReportBundle& out) {
  const auto m = feller_sub();
  const double x = 1.0, t = 1.0;
  const std::vector<double> Ts{2.0, 4.0, 8.0, 16.0};
  PathConfig pc;
  pc.dt = c.cfg.dt;
  pc.horizon = t;
  const double bias = t * pc.dt;
  const SpineLimitResult res = spine_limit_experiment(m, x, t, Ts, c.N, pc, c.cfg.seed, c.cfg.threads, kThetas);
  VerificationReport r("spine_limit");
  r.inputs = c.inputs(m, c.N, kSweep);
  r.inputs["x"] = x;
  r.inputs["t"] = t;
  r.inputs["T_list"] = Ts;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : res.rows) {
    rows.push_back({{"T", row.T}, {"u_T", row.u_T}, {"p_z0_one", row.p_z0_one},
                    {"p_single_line", row.p_single_line}, {"d_T", row.d_T}, {"d_T_se", row.d_T_se},
                    {"paired_se_prev", row.paired_se_prev}});
  }
  r.inputs["rows"] = std::move(rows);
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    // One-sided: an increase is allowed only up to 4 paired standard errors.
    const auto& prev = res.rows[i - 1];
    const auto& cur = res.rows[i];
    Assertion a = make_assertion("d_T non-increasing, T=" + std::to_string(static_cast<int>(cur.T)),
                                 prev.d_T, cur.d_T, cur.paired_se_prev, 0.0);
    if (cur.d_T <= prev.d_T) {
      a.z = 0.0;
      a.pass = true;
    }
    r.add(a);
  }
  const auto& last = res.rows.back();
  r.add(make_assertion("d_T at largest T", 0.0, last.d_T, last.d_T_se, bias, 3.0));
  {
    Assertion a = make_assertion("P(Z = 1 on [0,t]) at largest T > 0.99", 0.99, last.p_single_line, 0.0, 0.0, 0.0);
    a.z = last.p_single_line > 0.99 ? 0.0 : std::numeric_limits<double>::infinity();
    a.pass = last.p_single_line > 0.99;
    r.add(a);
  }
  out.reports.push_back(std::move(r));

  const PathModel spine = PathModel::spine(m, pc);
  const auto l = c.collect<double>(kSpineSde, c.N, [&](Rng& rr) { return spine.run(x, rr).final_mass(); });
  auto in = c.inputs(m, c.N, kSpineSde);
  in["x"] = x;
  in["t"] = t;
  out.reports.push_back(named(
      test_marginal_laplace(l, [&](double th) { return laplace_immigration(m, x, 1, t, th); }, kThetas, bias),
      "spine_sde/laplace", in));
}

void suite_extinction(const Ctx& c, ReportBundle& out) {
  const auto m = feller_super();
  const double H = 40.0;
  const double cap = 20.0;
  PathConfig pc;
  pc.dt = c.cfg.dt;
  pc.horizon = H;
  pc.mass_cap = cap;
  const PathModel model = PathModel::csbp(m, pc);
  const double ls = lambda_star(m);
  for (double x : {1.0, 3.0}) {
    const std::uint32_t tag = x == 1.0 ? kExtinct1 : kExtinct3;
    const auto ext = c.collect<double>(tag, c.N, [&](Rng& r) {
      return model.run(x, r).extinction_time ? 1.0 : 0.0;
    });
    auto in = c.inputs(m, c.N, tag);
    in["x"] = x;
    in["mass_cap"] = cap;
    // A path stopped at the cap still dies later with probability e^{-lambda* cap}.
    out.reports.push_back(named(test_extinction(ext, m, x, H, std::exp(-ls * cap)),
                                "extinction/x=" + std::to_string(static_cast<int>(x)), in));
  }
}

// Deliberately wrong oracle: the suite must fail.
void suite_selftest(const Ctx& c, ReportBundle& out) {
  const auto m = feller_super();
  const double x = 1.0, t = 1.0, th = 1.0;
  const auto xs = c.collect<double>(kSelf, c.N, [&](Rng& r) { return sample_feller_exact(m, x, t, r); });
  std::vector<double> f(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) f[i] = std::exp(-th * xs[i]);
  const double se = mean_se(f).se;
  auto in = c.inputs(m, c.N, kSelf);
  in["oracle_offset_se"] = 10.0;
  out.reports.push_back(named(
      test_marginal_laplace(xs, [&](double s) { return laplace_csbp(m, x, t, s) + 10.0 * se; }, {th}, 0.0),
      "selftest/corrupted_oracle", in));
}

struct SuiteSpec {
  std::size_t default_N;
  void (*run)(const Ctx&, ReportBundle&);
};

const std::map<std::string, SuiteSpec>& registry() {
  static const std::map<std::string, SuiteSpec> r{
      {"exact", {1000000, suite_exact}},
      {"euler", {100000, suite_euler}},
      {"theorem21", {100000, suite_theorem21}},
      {"theorem22", {100000, suite_theorem22}},
      {"theorem23", {100000, suite_theorem23}},
      {"extinction", {100000, suite_extinction}},
      {"selftest", {10000, suite_selftest}},
  };
  return r;
}

}  // namespace

std::vector<std::string> suite_names() {
  std::vector<std::string> names{"identities"};
  for (const auto& [k, v] : registry()) names.push_back(k);
  return names;
}

ReportBundle run_suite(const std::string& name, const SuiteConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ConfigError("suite: dt must be positive");
  ReportBundle out;
  out.suite = name;
  out.config["seed"] = cfg.seed;
  out.config["dt"] = cfg.dt;
  if (name == "identities") {
    if (cfg.mechanism) out.config["mechanism"] = cfg.mechanism->to_json();
    suite_identities(cfg, out);
    return out;
  }
  const auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("unknown suite '" + name + "'");
  if (cfg.mechanism) {
    throw ConfigError("suite '" + name + "' uses fixed mechanisms; a mechanism is only accepted by 'identities'");
  }
  const std::size_t n = cfg.N > 0 ? cfg.N : it->second.default_N;
  if (n < 1000) throw ConfigError("suite: N must be at least 1000");
  out.config["N"] = n;
  it->second.run(Ctx{cfg, n}, out);
  return out;
}

}  // namespace csbp
