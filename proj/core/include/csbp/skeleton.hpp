#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "csbp/evolution.hpp"
#include "csbp/mechanism.hpp"
#include "csbp/simulate.hpp"

namespace csbp {

class Rng;
class CsvWriter;

struct SkeletonEvent {
  enum class Kind { Branch, EdgeImmigration, BranchImmigration };
  double time;
  Kind kind;
  int offspring;  // Branch only
  double size;    // immigration only
};

/// A sampled (Lambda_t, Z_t) trajectory: total mass and prolific count.
struct CoupledPath {
  std::vector<double> times;
  std::vector<double> lambda_mass;
  std::vector<std::int64_t> z_count;
  std::vector<SkeletonEvent> events;  // only with record_path

  std::int64_t z_initial = 0;
  std::int64_t z_max = 0;
  std::int64_t z_min = 0;
  double first_branch_time = std::numeric_limits<double>::infinity();
  std::int64_t n_branch = 0;
  std::int64_t n_death = 0;  // Branch events with k = 0
  std::int64_t n_edge_immigration = 0;

  double final_lambda() const { return lambda_mass.back(); }
  std::int64_t final_z() const { return z_count.back(); }
};

struct InitialLaw {
  enum class Kind { Fixed, Poisson, PoissonConditionedPositive };
  Kind kind = Kind::Fixed;
  std::int64_t n = 0;
  double intensity = 0.0;

  static InitialLaw fixed(std::int64_t n);
  static InitialLaw poisson(double intensity);
  static InitialLaw poisson_positive(double intensity);
};

std::int64_t sample_initial(const InitialLaw& init, Rng& rng);

/// Homogeneous lambda-skeleton. Precomputes all laws once; run() is const and
/// may be called from several threads with separate generators.
class LambdaSkeleton {
 public:
  LambdaSkeleton(const BranchingMechanism& mech, double lambda, const PathConfig& cfg);
  CoupledPath run(double x, const InitialLaw& init, Rng& rng) const;
  double lambda() const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
};

/// Finite-horizon skeleton of the individuals with descendants alive at T.
class TSkeleton {
 public:
  TSkeleton(const BranchingMechanism& mech, double T, const PathConfig& cfg);
  CoupledPath run(double x, const InitialLaw& init, Rng& rng) const;
  const TimeSkeletonSchedule& schedule() const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
};

CoupledPath simulate_lambda_skeleton(const BranchingMechanism& mech, double lambda, double x,
                                     const InitialLaw& init, const PathConfig& cfg, Rng& rng);
CoupledPath simulate_T_skeleton(const BranchingMechanism& mech, double T, double x,
                                const InitialLaw& init, const PathConfig& cfg, Rng& rng);

std::vector<std::string> coupled_csv_header();
std::vector<std::string> event_csv_header();
/// One row per grid point (path_id, t, lambda_mass, z_count).
void write_coupled_rows(CsvWriter& w, std::size_t path_id, const CoupledPath& p);
/// One row per event (path_id, t, kind, offspring, size).
void write_event_rows(CsvWriter& w, std::size_t path_id, const CoupledPath& p);

struct SpineLimitRow {
  double T = 0.0;
  double u_T = 0.0;
  double p_z0_one = 0.0;
  double p_z0_one_se = 0.0;
  /// Fraction of paths with Z_s = 1 for every s <= t.
  double p_single_line = 0.0;
  double p_single_line_se = 0.0;
  std::vector<double> laplace;     // MC E[e^{-theta Lambda_t}] per theta
  std::vector<double> laplace_se;
  double d_T = 0.0;     // max_theta |MC - spine oracle|
  double d_T_se = 0.0;  // standard error at the maximising theta
  /// Paired s.e. of the change in the MC Laplace values from the previous T
  /// (max over theta); 0 for the first row.
  double paired_se_prev = 0.0;
};

struct SpineLimitResult {
  std::vector<double> theta_grid;
  std::vector<double> oracle;  // laplace_immigration(x, n = 1, t, theta)
  std::vector<SpineLimitRow> rows;
};

/// For each T, run N T-skeleton paths started from a conditioned Poisson
/// number of prolific individuals and compare Lambda_t with the spine
/// process. Path i uses the same random substream for every T.
SpineLimitResult spine_limit_experiment(const BranchingMechanism& mech, double x, double t,
                                        const std::vector<double>& T_list, std::size_t N,
                                        const PathConfig& cfg, std::uint64_t seed,
                                        unsigned threads,
                                        const std::vector<double>& theta_grid = {0.5, 1.0, 2.0});

}  // namespace csbp
