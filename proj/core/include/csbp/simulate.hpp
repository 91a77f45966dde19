#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "csbp/evolution.hpp"
#include "csbp/mechanism.hpp"

namespace csbp {

class Rng;
class CsvWriter;

enum class SmallJumpMode {
  /// Jumps below eps_jump are replaced by a Gaussian with matching variance.
  Compensate,
  /// Jumps below eps_jump are ignored; the missing variance is reported.
  Drop,
};

struct PathConfig {
  double dt = 1e-3;
  /// Negative means "pick automatically" (see default_eps_jump).
  double eps_jump = -1.0;
  SmallJumpMode small_jump_mode = SmallJumpMode::Compensate;
  double horizon = 1.0;
  bool absorb_at_zero = true;
  bool record_path = false;
  /// Stop early once the mass exceeds this value (used for extinction runs).
  double mass_cap = std::numeric_limits<double>::infinity();
  /// Accept an eps-truncated immigration law when its rate would be infinite.
  bool allow_truncated_immigration = false;

  void validate() const;
};

/// Smallest cutoff with Pi([eps, inf)) <= 1e3; 0 for finite-activity measures.
double default_eps_jump(const LevyMeasure& levy);

enum class JumpSource { Branching, Immigration };

struct JumpRecord {
  double time;
  double size;
  JumpSource source;
};

struct TrajectorySample {
  /// Grid times and masses; only the endpoints unless record_path is set.
  std::vector<double> times;
  std::vector<double> mass;
  std::optional<double> extinction_time;
  std::vector<JumpRecord> jumps;
  /// Set when the run stopped early at mass_cap.
  bool capped = false;

  double final_mass() const { return mass.back(); }
  double final_time() const { return times.back(); }
};

/// Precomputed Euler coefficients for one of the path engines. Construct once,
/// then run any number of paths (concurrently if desired).
class PathModel {
 public:
  static PathModel csbp(const BranchingMechanism& mech, const PathConfig& cfg);
  static PathModel spine(const BranchingMechanism& mech, const PathConfig& cfg);
  static PathModel die_by_T(const BranchingMechanism& mech, double T, const PathConfig& cfg);

  TrajectorySample run(double x, Rng& rng) const;

  const PathConfig& config() const { return cfg_; }
  /// Variance rate per unit mass that the Drop mode leaves out.
  double dropped_variance_rate() const { return dropped_variance_; }

  struct Impl;

 private:
  PathModel() = default;
  PathConfig cfg_;
  double dropped_variance_ = 0.0;
  std::shared_ptr<const Impl> impl_;
};

TrajectorySample simulate_csbp(const BranchingMechanism& mech, double x, const PathConfig& cfg,
                               Rng& rng);
TrajectorySample simulate_spine_sde(const BranchingMechanism& mech, double x,
                                    const PathConfig& cfg, Rng& rng);
TrajectorySample simulate_die_by_T(const BranchingMechanism& mech, double T, double x,
                                   const PathConfig& cfg, Rng& rng);

std::vector<std::string> trajectory_csv_header();
std::vector<std::string> jump_csv_header();
void write_trajectory_rows(CsvWriter& w, std::size_t path_id, const TrajectorySample& s);
void write_jump_rows(CsvWriter& w, std::size_t path_id, const TrajectorySample& s);

/// Exact draw of X_t for Pi = 0 as a Poisson number of exponential clumps.
double sample_feller_exact(const BranchingMechanism& mech, double x, double t, Rng& rng);

}  // namespace csbp
