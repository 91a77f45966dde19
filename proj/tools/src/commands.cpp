#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csbp/errors.hpp"
#include "csbp/evolution.hpp"
#include "csbp/io.hpp"
#include "csbp/parallel.hpp"
#include "csbp/rng.hpp"
#include "csbp/simulate.hpp"
#include "csbp/skeleton.hpp"
#include "csbp/stats.hpp"
#include "csbp/verify.hpp"

namespace csbp::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Stream tag for simulate/sweep paths; path i uses substream (seed, tag, i).
constexpr std::uint32_t kSimulateTag = 0x51;

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

ojson finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

class RunDir {
 public:
  explicit RunDir(const RunConfig& cfg) : started_(std::chrono::steady_clock::now()) {
    const std::string text = cfg.to_ini();
    const fs::path root = cfg.word(cfg.run, "out");
    const std::string base = utc_stamp() + "-" + fnv1a_hex(text).substr(0, 12);
    dir_ = root / base;
    for (int i = 1; fs::exists(dir_); ++i) dir_ = root / (base + "-" + std::to_string(i));
    fs::create_directories(dir_);
    write_text("config.resolved", text);
    config_json_ = ojson::object();
    for (const auto& [name, sec] : {std::pair{"mechanism", &cfg.mechanism},
                                    std::pair{"experiment", &cfg.experiment},
                                    std::pair{"run", &cfg.run}}) {
      if (sec->empty()) continue;
      ojson s = ojson::object();
      for (const auto& [k, v] : *sec) s[k] = v;
      config_json_[name] = std::move(s);
    }
  }

  const fs::path& path() const { return dir_; }

  std::ofstream open(const std::string& name) {
    artifacts_.push_back(name);
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw Error("cannot write " + (dir_ / name).string());
    return os;
  }

  void write_text(const std::string& name, const std::string& text) { open(name) << text; }

  /// Writes a JSON artifact and returns its digest.
  std::string write_json(const std::string& name, const ojson& j) {
    const std::string text = j.dump(2) + "\n";
    write_text(name, text);
    return fnv1a_hex(text);
  }

  void finish(const std::string& command, const std::string& report_digest) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    ojson rec;
    rec["command"] = command;
    rec["library_version"] = CSBP_VERSION;
    rec["config"] = config_json_;
    rec["finished_utc"] = utc_stamp();
    rec["elapsed_seconds"] = elapsed;
    rec["artifacts"] = artifacts_;
    rec["report_digest"] = report_digest;
    std::ofstream(dir_ / "run.json", std::ios::binary) << rec.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  std::chrono::steady_clock::time_point started_;
  std::vector<std::string> artifacts_;
  ojson config_json_;
};

std::string with_decimal(double v) {
  std::string s = format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::optional<double> try_oracle(const std::function<double()>& f) {
  try {
    return f();
  } catch (const Error&) {
    return std::nullopt;
  }
}

ojson laplace_rows(const std::vector<double>& xs, const std::vector<double>& thetas,
                   const std::function<double(double)>* oracle) {
  ojson rows = ojson::array();
  std::vector<double> f(xs.size());
  for (double th : thetas) {
    for (std::size_t i = 0; i < xs.size(); ++i) f[i] = std::exp(-th * xs[i]);
    const MeanSe m = mean_se(f);
    ojson r;
    r["theta"] = th;
    r["estimate"] = m.mean;
    r["se"] = m.se;
    if (oracle) {
      const auto o = try_oracle([&] { return (*oracle)(th); });
      r["oracle"] = o ? ojson(*o) : ojson(nullptr);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

PathConfig path_config(const RunConfig& c) {
  const auto& e = c.experiment;
  PathConfig pc;
  pc.dt = c.real(e, "dt");
  pc.horizon = c.real(e, "t");
  pc.eps_jump = c.word(e, "eps_jump") == "auto" ? -1.0 : c.real(e, "eps_jump");
  pc.small_jump_mode =
      c.word(e, "small_jump_mode") == "drop" ? SmallJumpMode::Drop : SmallJumpMode::Compensate;
  return pc;
}

// ---------------------------------------------------------------------------

std::string cmd_mech(const RunConfig& c, RunDir& run, const CommandOptions& opts, std::ostream& log) {
  const BranchingMechanism mech = build_mechanism(c);
  const std::string line = mechanism_summary_line(mech);
  if (!opts.quiet) log << mech.describe() << "\n";
  log << line << "\n";
  const double theta_max = c.real(c.experiment, "theta_max");
  const auto points = c.integer(c.experiment, "points");
  {
    auto os = run.open("psi.csv");
    CsvWriter w(os, {"theta", "psi", "psi_prime"});
    for (std::int64_t i = 0; i < points; ++i) {
      const double th = theta_max * static_cast<double>(i) / static_cast<double>(points - 1);
      w << th << psi(mech, th) << psi_prime(mech, th);
      w.end_row();
    }
  }
  ojson s;
  s["mechanism"] = mech.to_json();
  const Criticality cl = classify(mech);
  s["classification"] = to_string(cl);
  s["lambda_star"] = cl == Criticality::Supercritical ? ojson(lambda_star(mech)) : ojson(nullptr);
  try {
    s["grey"] = greys_condition(mech);
  } catch (const IndeterminateError&) {
    s["grey"] = "indeterminate";
  }
  s["summary_line"] = line;
  return run.write_json("summary.json", s);
}

std::string cmd_table(const RunConfig& c, RunDir& run, const CommandOptions& opts, std::ostream& log) {
  const BranchingMechanism mech = build_mechanism(c);
  const auto& e = c.experiment;
  ojson s;
  s["mechanism"] = mech.to_json();
  if (c.word(e, "kind") == "u") {
    const bool inf = c.word(e, "theta") == "inf";
    const double theta = inf ? std::numeric_limits<double>::infinity() : c.real(e, "theta");
    const double t = c.real(e, "t");
    const auto points = c.integer(e, "points");
    std::vector<double> times;
    for (std::int64_t i = 0; i < points; ++i) {
      times.push_back(t * static_cast<double>(i) / static_cast<double>(points - 1));
    }
    const EvolutionTable tab = solve_u(mech, theta, times);
    {
      auto os = run.open("table.csv");
      tab.write_csv(os, !inf);
    }
    s["theta"] = inf ? ojson("inf") : ojson(theta);
    s["t"] = t;
    s["u_t"] = finite_or_null(tab.u.back());
    s["solver_rel_tol"] = tab.tol;
    if (!opts.quiet) log << "u_" << format_double(t) << "(" << (inf ? "inf" : format_double(theta)) << ") = " << format_double(tab.u.back()) << "\n";
  } else {
    const double T = c.real(e, "T");
    const double t = c.real(e, "t");
    const HorizonGrid grid = horizon_grid(T, t, c.real(e, "dt"));
    const TimeSkeletonSchedule sched = time_schedule(mech, T, grid);
    {
      auto os = run.open("table.csv");
      sched.write_csv(os);
    }
    s["T"] = T;
    s["horizon"] = t;
    s["points"] = sched.s().size();
    s["truncated"] = sched.truncated();
    s["rate_at_horizon"] = sched.rate().back();
    if (!opts.quiet) log << "schedule with " << sched.s().size() << " points written\n";
  }
  return run.write_json("summary.json", s);
}

struct PathEnd {
  double mass = 0.0;
  bool extinct = false;
};

struct SkeletonEnd {
  double lambda = 0.0;
  std::int64_t z = 0;
  std::int64_t z_max = 0;
  std::int64_t z_initial = 0;
  double first_branch = 0.0;
};

std::string cmd_simulate(const RunConfig& c, RunDir& run, const CommandOptions& opts, std::ostream& log) {
  const BranchingMechanism mech = build_mechanism(c);
  const auto& e = c.experiment;
  const std::string kind = c.word(e, "kind");
  const double x = c.real(e, "x");
  const double t = c.real(e, "t");
  const auto N = static_cast<std::size_t>(c.integer(e, "N"));
  const std::uint64_t seed = c.u64(c.run, "seed");
  const auto thetas = c.reals(e, "theta_grid");
  const std::size_t limit =
      opts.paths ? std::min<std::size_t>(N, static_cast<std::size_t>(c.integer(e, "paths_limit"))) : 0;
  PathConfig pc = path_config(c);
  pc.record_path = limit > 0;

  ojson s;
  s["kind"] = kind;
  s["mechanism"] = mech.to_json();
  s["x"] = x;
  s["t"] = t;
  s["N"] = N;
  s["seed"] = seed;

  if (kind == "csbp" || kind == "spine" || kind == "die_by_T") {
    const double T = kind == "die_by_T" ? c.real(e, "T") : 0.0;
    const PathModel model = kind == "csbp"    ? PathModel::csbp(mech, pc)
                            : kind == "spine" ? PathModel::spine(mech, pc)
                                              : PathModel::die_by_T(mech, T, pc);
    std::vector<PathEnd> ends(N);
    std::vector<TrajectorySample> kept(limit);
    parallel_for(N, opts.threads, [&](std::size_t i) {
      Rng rng(seed, substream_id(kSimulateTag, i));
      TrajectorySample p = model.run(x, rng);
      ends[i] = {p.final_mass(), p.extinction_time.has_value()};
      if (i < limit) kept[i] = std::move(p);
    });
    std::vector<double> xs(N), ext(N);
    for (std::size_t i = 0; i < N; ++i) {
      xs[i] = ends[i].mass;
      ext[i] = ends[i].extinct ? 1.0 : 0.0;
    }
    const MeanSe m = mean_se(xs);
    s["mean_X_t"] = m.mean;
    s["mean_X_t_se"] = m.se;
    s["var_X_t"] = m.var;
    if (kind == "csbp") s["mean_X_t_oracle"] = x * std::exp(mech.alpha() * t);
    if (kind != "spine") {
      const MeanSe pe = mean_se(ext);
      s["p_extinct"] = pe.mean;
      s["p_extinct_se"] = pe.se;
    }
    std::function<double(double)> oracle;
    if (kind == "csbp") oracle = [&](double th) { return laplace_csbp(mech, x, t, th); };
    if (kind == "spine") oracle = [&](double th) { return laplace_immigration(mech, x, 1, t, th); };
    if (kind == "die_by_T") oracle = [&](double th) { return laplace_die_by_T(mech, T, x, t, th); };
    s["laplace"] = laplace_rows(xs, thetas, &oracle);
    s["eps_jump"] = model.config().eps_jump;
    if (pc.small_jump_mode == SmallJumpMode::Drop) s["dropped_variance_rate"] = model.dropped_variance_rate();
    if (limit > 0) {
      auto os = run.open("paths.csv");
      CsvWriter w(os, trajectory_csv_header());
      for (std::size_t i = 0; i < limit; ++i) write_trajectory_rows(w, i, kept[i]);
      auto js = run.open("jumps.csv");
      CsvWriter wj(js, jump_csv_header());
      for (std::size_t i = 0; i < limit; ++i) write_jump_rows(wj, i, kept[i]);
    }
    if (!opts.quiet) {
      log << kind << ": mean X_t = " << format_double(m.mean) << " +- " << format_double(m.se) << "\n";
    }
  } else {
    const std::string init_kind = c.word(e, "init");
    std::optional<LambdaSkeleton> lam;
    std::optional<TSkeleton> tsk;
    double tilt = 0.0;
    double T = 0.0;
    if (kind == "lambda_skeleton") {
      tilt = c.real(e, "lambda");
      lam.emplace(mech, tilt, pc);
    } else {
      T = c.real(e, "T");
      tsk.emplace(mech, T, pc);
      tilt = u_infinity(mech, T);
    }
    InitialLaw init = init_kind == "fixed"      ? InitialLaw::fixed(c.integer(e, "init_n"))
                      : init_kind == "poisson" ? InitialLaw::poisson(tilt * x)
                                               : InitialLaw::poisson_positive(tilt * x);
    std::vector<SkeletonEnd> ends(N);
    std::vector<CoupledPath> kept(limit);
    parallel_for(N, opts.threads, [&](std::size_t i) {
      Rng rng(seed, substream_id(kSimulateTag, i));
      CoupledPath p = lam ? lam->run(x, init, rng) : tsk->run(x, init, rng);
      ends[i] = {p.final_lambda(), p.final_z(), p.z_max, p.z_initial, p.first_branch_time};
      if (i < limit) kept[i] = std::move(p);
    });
    std::vector<double> ls(N), zs(N), fb(N);
    bool z_zero = true;
    for (std::size_t i = 0; i < N; ++i) {
      ls[i] = ends[i].lambda;
      zs[i] = static_cast<double>(ends[i].z);
      fb[i] = ends[i].first_branch > t ? 1.0 : 0.0;
      z_zero = z_zero && ends[i].z_max == 0;
    }
    s["init"] = init_kind;
    s["tilt"] = tilt;
    const MeanSe ml = mean_se(ls);
    const MeanSe mz = mean_se(zs);
    const MeanSe mf = mean_se(fb);
    s["mean_Lambda_t"] = ml.mean;
    s["mean_Lambda_t_se"] = ml.se;
    s["mean_Z_t"] = mz.mean;
    s["mean_Z_t_se"] = mz.se;
    s["z_identically_zero"] = z_zero;
    s["p_no_branch_by_t"] = mf.mean;
    s["p_no_branch_by_t_se"] = mf.se;
    std::function<double(double)> oracle;
    if (init_kind == "poisson") oracle = [&](double th) { return laplace_csbp(mech, x, t, th); };
    if (kind == "T_skeleton" && init_kind == "fixed" && c.integer(e, "init_n") == 0) {
      oracle = [&](double th) { return laplace_die_by_T(mech, T, x, t, th); };
    }
    s["laplace_Lambda_t"] = laplace_rows(ls, thetas, oracle ? &oracle : nullptr);
    if (z_zero) s["note"] = "Z is identically 0 on every path";
    if (limit > 0) {
      auto os = run.open("paths.csv");
      CsvWriter w(os, coupled_csv_header());
      for (std::size_t i = 0; i < limit; ++i) write_coupled_rows(w, i, kept[i]);
      auto es = run.open("events.csv");
      CsvWriter we(es, event_csv_header());
      for (std::size_t i = 0; i < limit; ++i) write_event_rows(we, i, kept[i]);
    }
    if (!opts.quiet) {
      log << kind << ": mean Lambda_t = " << format_double(ml.mean) << " +- " << format_double(ml.se)
          << ", mean Z_t = " << format_double(mz.mean) << " +- " << format_double(mz.se) << "\n";
      if (z_zero) log << "Z is identically 0 on every path\n";
    }
  }
  return run.write_json("summary.json", s);
}

std::string cmd_sweep(const RunConfig& c, RunDir& run, const CommandOptions& opts, std::ostream& log) {
  const BranchingMechanism mech = build_mechanism(c);
  const auto& e = c.experiment;
  const double x = c.real(e, "x");
  const double t = c.real(e, "t");
  const auto Ts = c.reals(e, "T_list");
  const auto N = static_cast<std::size_t>(c.integer(e, "N"));
  const PathConfig pc = path_config(c);
  const SpineLimitResult res = spine_limit_experiment(mech, x, t, Ts, N, pc, c.u64(c.run, "seed"),
                                                      opts.threads, c.reals(e, "theta_grid"));
  {
    auto os = run.open("sweep.csv");
    CsvWriter w(os, {"T", "P_hat_Z0_eq_1", "d_T", "se", "P_hat_single_line", "u_T", "paired_se_prev"});
    for (const auto& r : res.rows) {
      w << r.T << r.p_z0_one << r.d_T << r.d_T_se << r.p_single_line << r.u_T << r.paired_se_prev;
      w.end_row();
    }
  }
  ojson s;
  s["mechanism"] = mech.to_json();
  s["x"] = x;
  s["t"] = t;
  s["N"] = N;
  s["theta_grid"] = res.theta_grid;
  s["spine_oracle"] = res.oracle;
  ojson rows = ojson::array();
  bool monotone = true;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    rows.push_back({{"T", r.T}, {"u_T", r.u_T}, {"P_hat_Z0_eq_1", r.p_z0_one},
                    {"P_hat_Z0_eq_1_se", r.p_z0_one_se}, {"P_hat_single_line", r.p_single_line},
                    {"P_hat_single_line_se", r.p_single_line_se}, {"laplace", r.laplace},
                    {"laplace_se", r.laplace_se}, {"d_T", r.d_T}, {"d_T_se", r.d_T_se},
                    {"paired_se_prev", r.paired_se_prev}});
    if (i > 0 && r.d_T > res.rows[i - 1].d_T + 4.0 * r.paired_se_prev) monotone = false;
    if (!opts.quiet) {
      log << "T = " << format_double(r.T) << "  P(Z0=1) = " << format_double(r.p_z0_one)
          << "  d_T = " << format_double(r.d_T) << " (se " << format_double(r.d_T_se) << ")\n";
    }
  }
  s["rows"] = std::move(rows);
  if (res.rows.size() > 1) {
    s["d_T_monotone_within_noise"] = monotone;
  } else {
    s["d_T_monotone_within_noise"] = nullptr;
  }
  return run.write_json("summary.json", s);
}

}  // namespace

std::string mechanism_summary_line(const BranchingMechanism& mech) {
  const Criticality cl = classify(mech);
  std::string line = to_string(cl);
  if (cl == Criticality::Supercritical) line += ", λ* = " + with_decimal(lambda_star(mech));
  std::string grey;
  try {
    grey = greys_condition(mech) ? "true" : "false";
  } catch (const IndeterminateError&) {
    grey = "indeterminate";
  }
  return line + ", Grey: " + grey;
}

CommandResult run_command(Command cmd, const RunConfig& cfg, const CommandOptions& opts,
                          std::ostream& log) {
  CommandResult res;
  if (cmd == Command::Verify) {
    SuiteConfig sc;
    sc.seed = cfg.u64(cfg.run, "seed");
    sc.N = static_cast<std::size_t>(cfg.integer(cfg.experiment, "N"));
    sc.dt = cfg.real(cfg.experiment, "dt");
    sc.threads = opts.threads;
    if (!cfg.mechanism.empty()) sc.mechanism = build_mechanism(cfg);
    // Run before creating the directory so that a configuration error leaves nothing behind.
    const ReportBundle bundle = run_suite(cfg.word(cfg.run, "suite"), sc);
    RunDir run(cfg);
    const std::string digest = run.write_json("report.json", bundle.to_json());
    run.write_text("report.txt", bundle.text_table());
    run.finish(to_string(cmd), digest);
    if (!opts.quiet) log << bundle.text_table();
    log << "verdict: " << (bundle.passed() ? "PASS" : "FAIL") << "  (" << run.path().string() << ")\n";
    res.exit_code = bundle.passed() ? 0 : 1;
    res.run_dir = run.path();
    return res;
  }
  RunDir run(cfg);
  std::string digest;
  switch (cmd) {
    case Command::Mech: digest = cmd_mech(cfg, run, opts, log); break;
    case Command::Table: digest = cmd_table(cfg, run, opts, log); break;
    case Command::Simulate: digest = cmd_simulate(cfg, run, opts, log); break;
    case Command::Sweep: digest = cmd_sweep(cfg, run, opts, log); break;
    case Command::Verify: break;
  }
  run.finish(to_string(cmd), digest);
  if (!opts.quiet) log << "run directory: " << run.path().string() << "\n";
  res.run_dir = run.path();
  return res;
}

}  // namespace csbp::cli
