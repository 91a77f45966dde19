#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "csbp/errors.hpp"
#include "csbp/verify.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool paths = false;
  bool quiet = false;
  unsigned threads = 0;
  std::string suite;
  bool list = false;
};

void common_flags(CLI::App* sub, Flags& f, bool config_required) {
  auto* opt = sub->add_option("--config", f.config, "INI run configuration");
  if (config_required) opt->required();
  sub->add_option("--seed", f.seed, "64-bit run seed (overrides [run] seed)");
  sub->add_option("--out", f.out, "parent directory for run directories (overrides [run] out)");
  sub->add_flag("--quiet", f.quiet, "print only the essential result line");
  sub->add_option("--threads", f.threads, "worker threads, 0 = all cores; results do not depend on it");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace csbp;
  using cli::Command;

  CLI::App app{"Continuous-state branching processes: oracles, simulation and verification"};
  app.set_version_flag("--version", std::string(CSBP_VERSION));
  app.require_subcommand(1);
  Flags f;
  std::map<CLI::App*, Command> commands;
  auto* mech = app.add_subcommand("mech", "classify a mechanism and tabulate psi, psi'");
  common_flags(mech, f, true);
  commands[mech] = Command::Mech;
  auto* table = app.add_subcommand("table", "tabulate u_t(theta) or a horizon skeleton schedule");
  common_flags(table, f, true);
  commands[table] = Command::Table;
  auto* sim = app.add_subcommand("simulate", "run path simulations and summarise endpoints");
  common_flags(sim, f, true);
  sim->add_flag("--paths", f.paths, "write per-path CSVs (first [experiment] paths_limit paths)");
  commands[sim] = Command::Simulate;
  auto* verify = app.add_subcommand("verify", "run a verification suite; exit 1 on failure");
  common_flags(verify, f, false);
  verify->add_option("suite", f.suite, "suite name (or [run] suite)");
  verify->add_flag("--list", f.list, "list suite names and exit");
  commands[verify] = Command::Verify;
  auto* sweep = app.add_subcommand("sweep", "skeleton-to-spine experiment over a list of horizons");
  common_flags(sweep, f, true);
  commands[sweep] = Command::Sweep;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Command cmd = Command::Mech;
  for (auto* sub : app.get_subcommands()) cmd = commands.at(sub);

  if (cmd == Command::Verify && f.list) {
    for (const auto& n : suite_names()) std::cout << n << "\n";
    return 0;
  }

  try {
    cli::RunConfig raw = f.config.empty() ? cli::RunConfig{} : cli::load_config(f.config);
    if (f.seed) raw.run["seed"] = std::to_string(*f.seed);
    if (f.out) raw.run["out"] = *f.out;
    if (cmd == Command::Verify && !f.suite.empty()) {
      const auto it = raw.run.find("suite");
      if (it != raw.run.end() && it->second != f.suite) {
        throw ConfigError("suite '" + f.suite + "' conflicts with [run] suite = " + it->second);
      }
      raw.run["suite"] = f.suite;
    }
    const cli::RunConfig cfg = cli::resolve(raw, cmd);
    cli::CommandOptions opts;
    opts.paths = f.paths;
    opts.quiet = f.quiet;
    opts.threads = f.threads;
    return cli::run_command(cmd, cfg, opts, std::cout).exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const IndeterminateError& e) {
    std::cerr << "indeterminate: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
