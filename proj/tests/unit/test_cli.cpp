#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "csbp/errors.hpp"

using namespace csbp;
using namespace csbp::cli;
namespace fs = std::filesystem;

namespace {

const char* kSuperIni = R"(
[mechanism]
family = feller
alpha = 1
beta = 1
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig resolved(const std::string& text, Command cmd) { return resolve(parse_config(text), cmd); }

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("csbp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string with_out(const std::string& text) const {
    return text + "\n[run]\nout = " + dir_.string() + "\n";
  }
  fs::path dir_;
};

}  // namespace

TEST(Config, SyntaxErrors) {
  EXPECT_THROW(parse_config("[bogus]\na = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[mechanism]\nalpha = 1\nalpha = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("alpha = 1\n"), ConfigError);
  EXPECT_NO_THROW(parse_config("; comment\n[mechanism]\n# other\nfamily = feller\n"));
}

TEST(Config, UnknownAndMisplacedKeys) {
  EXPECT_THROW(resolved(std::string(kSuperIni) + "gamma = 3\n", Command::Mech), ConfigError);
  EXPECT_THROW(resolved(std::string(kSuperIni) + "c = 3\n", Command::Mech), ConfigError);
  EXPECT_THROW(resolved(std::string(kSuperIni) + "[experiment]\nkind = csbp\nlambda = 1\n",
                        Command::Simulate),
               ConfigError);
  EXPECT_THROW(resolved(std::string(kSuperIni) + "[experiment]\nkind = nope\n", Command::Simulate),
               ConfigError);
  EXPECT_THROW(resolved(std::string(kSuperIni) + "[experiment]\nkind = csbp\nN = ten\n",
                        Command::Simulate),
               ConfigError);
}

TEST(Config, KindParameterMismatches) {
  // lambda missing for lambda_skeleton
  EXPECT_THROW(resolved(std::string(kSuperIni) + "[experiment]\nkind = lambda_skeleton\n",
                        Command::Simulate),
               ConfigError);
  // t >= T
  const std::string sub = "[mechanism]\nfamily = feller\nalpha = -1\nbeta = 1\n";
  EXPECT_THROW(resolved(sub + "[experiment]\nkind = T_skeleton\nT = 1\nt = 1\n", Command::Simulate),
               ConfigError);
  // lambda below lambda*
  EXPECT_THROW(resolved(std::string(kSuperIni) + "[experiment]\nkind = lambda_skeleton\nlambda = 0.5\n",
                        Command::Simulate),
               ConfigError);
  // sweep: supercritical, non-increasing T_list, t >= min T
  EXPECT_THROW(resolved(std::string(kSuperIni) + "[experiment]\nkind = sweep\nT_list = 2, 4\n",
                        Command::Sweep),
               ConfigError);
  EXPECT_THROW(resolved(sub + "[experiment]\nkind = sweep\nT_list = 4, 2\n", Command::Sweep),
               ConfigError);
  EXPECT_THROW(resolved(sub + "[experiment]\nkind = sweep\nT_list = 1, 4\n", Command::Sweep),
               ConfigError);
  EXPECT_NO_THROW(resolved(sub + "[experiment]\nkind = sweep\nT_list = 2\n", Command::Sweep));
  // fixed init needs a count
  EXPECT_THROW(resolved(std::string(kSuperIni) +
                            "[experiment]\nkind = lambda_skeleton\nlambda = 1\ninit = fixed\n",
                        Command::Simulate),
               ConfigError);
}

TEST(Config, RoundTripIsIdentity) {
  const std::string text = std::string(R"(
[mechanism]
family = exponential
alpha = -1
beta = 0.5
c = 1
b = 1

[experiment]
kind = csbp
x = 2.5
theta_grid = 0.1,1,  3
)");
  const RunConfig a = resolved(text, Command::Simulate);
  const RunConfig b = parse_config(a.to_ini());
  EXPECT_EQ(a, b);
  EXPECT_EQ(resolve(b, Command::Simulate), a);
  EXPECT_EQ(a.experiment.at("theta_grid"), "0.1, 1, 3");
  EXPECT_EQ(a.experiment.at("N"), "10000");

  const RunConfig atoms = resolved(
      "[mechanism]\nfamily = atoms\nalpha = -1\natoms = 1:1, 2:0.5\n", Command::Mech);
  EXPECT_EQ(parse_config(atoms.to_ini()), atoms);
  EXPECT_EQ(atoms.atoms(atoms.mechanism, "atoms").size(), 2u);
}

TEST(Config, BuildsEveryFamily) {
  EXPECT_EQ(build_mechanism(resolved(kSuperIni, Command::Mech)).alpha(), 1.0);
  EXPECT_TRUE(build_mechanism(resolved("[mechanism]\nfamily = stable\nalpha = -1\nc = 1\na = 1.5\n",
                                       Command::Mech))
                  .levy()
                  .is_stable());
  EXPECT_THROW(resolved("[mechanism]\nfamily = stable\nalpha = -1\nc = 1\na = 2.5\n", Command::Mech),
               ConfigError);
}

TEST(Summary, MechanismLines) {
  EXPECT_EQ(mechanism_summary_line(BranchingMechanism::feller(1, 1)),
            "Supercritical, λ* = 1.0, Grey: true");
  EXPECT_EQ(mechanism_summary_line(BranchingMechanism::feller(-1, 1)), "Subcritical, Grey: true");
  EXPECT_EQ(mechanism_summary_line({-1.0, 0.0, LevyMeasure::atoms({{1.0, 1.0}})}),
            "Subcritical, Grey: false");
}

TEST_F(TempDir, SimulateWritesRunRecordAndReproduces) {
  const std::string text =
      with_out(std::string(kSuperIni) + "[experiment]\nkind = csbp\nN = 2000\ndt = 0.01\n");
  const RunConfig cfg = resolved(text, Command::Simulate);
  std::ostringstream log;
  CommandOptions o1;
  o1.threads = 1;
  o1.paths = true;
  const auto r1 = run_command(Command::Simulate, cfg, o1, log);
  EXPECT_EQ(r1.exit_code, 0);
  for (const char* f : {"config.resolved", "summary.json", "run.json", "paths.csv", "jumps.csv"}) {
    EXPECT_TRUE(fs::exists(r1.run_dir / f)) << f;
  }
  const auto summary = nlohmann::json::parse(slurp(r1.run_dir / "summary.json"));
  EXPECT_LE(std::abs(summary["mean_X_t"].get<double>() - std::exp(1.0)),
            4 * summary["mean_X_t_se"].get<double>() + 0.05);
  const auto record = nlohmann::json::parse(slurp(r1.run_dir / "run.json"));
  EXPECT_TRUE(record.contains("report_digest"));
  EXPECT_TRUE(record.contains("artifacts"));

  // rerun from the stored config with another thread count
  const RunConfig again = resolve(load_config((r1.run_dir / "config.resolved").string()),
                                  Command::Simulate);
  EXPECT_EQ(again, cfg);
  CommandOptions o2 = o1;
  o2.threads = 3;
  const auto r2 = run_command(Command::Simulate, again, o2, log);
  EXPECT_NE(r1.run_dir, r2.run_dir);
  for (const char* f : {"summary.json", "paths.csv", "jumps.csv", "config.resolved"}) {
    EXPECT_EQ(slurp(r1.run_dir / f), slurp(r2.run_dir / f)) << f;
  }
}

TEST_F(TempDir, LambdaSkeletonEmptyNotesZeroSkeleton) {
  const std::string text = with_out(std::string(kSuperIni) +
      "[experiment]\nkind = lambda_skeleton\nlambda = 1\ninit = fixed\ninit_n = 0\nN = 1000\ndt = 0.01\n");
  std::ostringstream log;
  const auto r = run_command(Command::Simulate, resolved(text, Command::Simulate), {}, log);
  const auto s = nlohmann::json::parse(slurp(r.run_dir / "summary.json"));
  EXPECT_TRUE(s["z_identically_zero"].get<bool>());
}

TEST_F(TempDir, SweepSingleRowHasNoMonotonicityVerdict) {
  const std::string text = with_out(
      "[mechanism]\nfamily = feller\nalpha = -1\nbeta = 1\n[experiment]\nkind = sweep\n"
      "N = 1000\ndt = 0.01\nT_list = 2\n");
  std::ostringstream log;
  const auto r = run_command(Command::Sweep, resolved(text, Command::Sweep), {}, log);
  const std::string csv = slurp(r.run_dir / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.substr(0, csv.find(',')), "T");
  const auto s = nlohmann::json::parse(slurp(r.run_dir / "summary.json"));
  EXPECT_TRUE(s["d_T_monotone_within_noise"].is_null());
}

TEST_F(TempDir, VerifyExitCodes) {
  std::ostringstream log;
  CommandOptions q;
  q.quiet = true;
  const auto ok = run_command(
      Command::Verify, resolved(with_out("") + "suite = identities\n", Command::Verify), q, log);
  EXPECT_EQ(ok.exit_code, 0);
  EXPECT_TRUE(fs::exists(ok.run_dir / "report.json"));
  const auto bad = run_command(
      Command::Verify, resolved(with_out("") + "suite = selftest\n", Command::Verify), q, log);
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_THROW(resolved(with_out("") + "suite = nope\n", Command::Verify), ConfigError);
}

TEST_F(TempDir, MechAndTableArtifacts) {
  std::ostringstream log;
  const auto m = run_command(Command::Mech, resolved(with_out(kSuperIni), Command::Mech), {}, log);
  EXPECT_NE(log.str().find("Supercritical, λ* = 1.0, Grey: true"), std::string::npos);
  const std::string psi_csv = slurp(m.run_dir / "psi.csv");
  EXPECT_EQ(std::count(psi_csv.begin(), psi_csv.end(), '\n'), 102);

  const auto t = run_command(
      Command::Table,
      resolved(with_out(std::string(kSuperIni) + "[experiment]\nkind = u\ntheta = inf\nt = 2\n"),
               Command::Table),
      {}, log);
  EXPECT_TRUE(fs::exists(t.run_dir / "table.csv"));
}
