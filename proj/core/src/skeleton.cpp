#include "csbp/skeleton.hpp"

#include <cmath>

#include "csbp/errors.hpp"
#include "csbp/io.hpp"
#include "csbp/parallel.hpp"
#include "csbp/rng.hpp"
#include "csbp/stats.hpp"
#include "euler.hpp"

namespace csbp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t count_steps(const PathConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
}

double skeleton_eps(const PathConfig& cfg, const LevyMeasure& levy) {
  if (cfg.eps_jump >= 0.0) return cfg.eps_jump;
  return default_eps_jump(levy);
}

// State shared by both skeleton engines while a path is being built.
struct PathState {
  double X;
  std::int64_t Z;
  double t = 0.0;
  double two_beta;
  CoupledPath out;
  bool record;

  void advance(const detail::EulerStep& step, double to, Rng& rng) {
    const double h = to - t;
    if (h <= 0.0) return;
    if (X > 0.0) X = step.advance(X, h, rng, nullptr, t);
    X += two_beta * static_cast<double>(Z) * h;
    t = to;
  }

  void immigrate(double r, SkeletonEvent::Kind kind) {
    X += r;
    if (record) out.events.push_back({t, kind, 0, r});
  }

  void branch(int k) {
    ++out.n_branch;
    if (k == 0) ++out.n_death;
    if (out.first_branch_time == kInf) out.first_branch_time = t;
    Z += k - 1;
    out.z_max = std::max(out.z_max, Z);
    out.z_min = std::min(out.z_min, Z);
    if (record) out.events.push_back({t, SkeletonEvent::Kind::Branch, k, 0.0});
  }

  void mark_grid() {
    if (record) {
      out.times.push_back(t);
      out.lambda_mass.push_back(X);
      out.z_count.push_back(Z);
    }
  }

  CoupledPath finish() {
    if (!record || out.times.back() != t) {
      out.times.push_back(t);
      out.lambda_mass.push_back(X);
      out.z_count.push_back(Z);
    }
    return std::move(out);
  }
};

PathState start_path(double x, std::int64_t z0, double beta, bool record) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("skeleton: x must be >= 0");
  PathState st{x, z0, 0.0, 2.0 * beta, {}, record};
  st.out.z_initial = z0;
  st.out.z_max = z0;
  st.out.z_min = z0;
  st.out.times.push_back(0.0);
  st.out.lambda_mass.push_back(x);
  st.out.z_count.push_back(z0);
  return st;
}

}  // namespace

InitialLaw InitialLaw::fixed(std::int64_t n) {
  if (n < 0) throw DomainError("InitialLaw: n must be >= 0");
  return {Kind::Fixed, n, 0.0};
}

InitialLaw InitialLaw::poisson(double intensity) {
  if (!(intensity >= 0.0)) throw DomainError("InitialLaw: intensity must be >= 0");
  return {Kind::Poisson, 0, intensity};
}

InitialLaw InitialLaw::poisson_positive(double intensity) {
  if (!(intensity > 0.0)) throw DomainError("InitialLaw: conditioned intensity must be > 0");
  return {Kind::PoissonConditionedPositive, 0, intensity};
}

std::int64_t sample_initial(const InitialLaw& init, Rng& rng) {
  switch (init.kind) {
    case InitialLaw::Kind::Fixed:
      return init.n;
    case InitialLaw::Kind::Poisson:
      return rng.poisson(init.intensity);
    case InitialLaw::Kind::PoissonConditionedPositive: {
      const double mu = init.intensity;
      if (mu > 1e-3) {
        for (;;) {
          const auto k = rng.poisson(mu);
          if (k >= 1) return k;
        }
      }
      // Inverse cdf of mu^k e^{-mu} / (k! (1 - e^{-mu})), k >= 1.
      double pk = mu * std::exp(-mu) / -std::expm1(-mu);
      double target = rng.uniform();
      std::int64_t k = 1;
      while (target > pk && k < 1000) {
        target -= pk;
        ++k;
        pk *= mu / static_cast<double>(k);
      }
      return k;
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct LambdaSkeleton::Impl {
  BranchingMechanism mech;
  double lambda;
  PathConfig cfg;
  std::size_t n_steps;
  detail::EulerStep step;
  detail::LineImmigration edge;
  BranchLaw branch;
};

LambdaSkeleton::LambdaSkeleton(const BranchingMechanism& mech, double lambda,
                               const PathConfig& cfg) {
  cfg.validate();
  if (classify(mech) != Criticality::Supercritical) {
    throw DomainError("lambda-skeleton: mechanism must be supercritical");
  }
  const double ls = lambda_star(mech);
  if (lambda < ls * (1.0 - 1e-12)) throw DomainError("lambda-skeleton: lambda below lambda*");
  const double eps = skeleton_eps(cfg, mech.levy());
  PathConfig resolved = cfg;
  resolved.eps_jump = eps;
  impl_ = std::make_shared<Impl>(Impl{
      mech, lambda, resolved, count_steps(cfg),
      detail::make_euler_step(-psi_prime(mech, lambda), mech.beta(), mech.levy().tilted(lambda),
                              eps, cfg.small_jump_mode),
      detail::make_line_immigration(mech, lambda, eps, true), BranchLaw::homogeneous(mech, lambda)});
}

double LambdaSkeleton::lambda() const { return impl_->lambda; }

CoupledPath LambdaSkeleton::run(double x, const InitialLaw& init, Rng& rng) const {
  const Impl& im = *impl_;
  PathState st = start_path(x, sample_initial(init, rng), im.mech.beta(), im.cfg.record_path);
  const double per_individual = im.branch.rate() + im.edge.rate;
  const double p_branch = im.branch.rate() / per_individual;
  for (std::size_t k = 0; k < im.n_steps; ++k) {
    const double t_end = std::min(static_cast<double>(k + 1) * im.cfg.dt, im.cfg.horizon);
    for (;;) {
      if (st.Z == 0) break;
      const double tau = st.t + rng.exponential(static_cast<double>(st.Z) * per_individual);
      if (tau >= t_end) break;
      st.advance(im.step, tau, rng);
      if (rng.uniform() < p_branch) {
        const BranchOutcome b = im.branch.sample(rng);
        st.branch(b.offspring);
        if (b.immigrant > 0.0) st.immigrate(b.immigrant, SkeletonEvent::Kind::BranchImmigration);
      } else {
        ++st.out.n_edge_immigration;
        st.immigrate(im.edge.sample_size(rng), SkeletonEvent::Kind::EdgeImmigration);
      }
    }
    st.advance(im.step, t_end, rng);
    st.mark_grid();
  }
  return st.finish();
}

// ---------------------------------------------------------------------------

struct TSkeleton::Impl {
  BranchingMechanism mech;
  double T;
  PathConfig cfg;
  std::size_t n_steps;
  TimeSkeletonSchedule sched;
  double eps;
  bool has_edge;
  std::vector<detail::EulerStep> steps;
  std::vector<double> bound;  // per-individual event-rate bound on each step

  double edge_rate(double u) const {
    if (!has_edge) return 0.0;
    return mech.levy().moment(1, u, eps, kInf);
  }
  double branch_rate(double u) const { return prolific_numerator(mech, u) / u; }
};

TSkeleton::TSkeleton(const BranchingMechanism& mech, double T, const PathConfig& cfg) {
  cfg.validate();
  if (!(cfg.horizon < T)) throw DomainError("T-skeleton: horizon must be < T");
  const HorizonGrid grid = horizon_grid(T, cfg.horizon, std::min(0.01, cfg.dt * 10.0));
  if (grid.truncated) {
    throw DomainError("T-skeleton: horizon is within 1e-4 T of T; schedule would be truncated");
  }
  const double eps = skeleton_eps(cfg, mech.levy());
  PathConfig resolved = cfg;
  resolved.eps_jump = eps;
  auto impl = std::make_shared<Impl>(Impl{mech, T, resolved, count_steps(cfg),
                                          time_schedule(mech, T, grid), eps,
                                          !mech.levy().is_none(), {}, {}});
  impl->steps.reserve(impl->n_steps);
  impl->bound.reserve(impl->n_steps);
  for (std::size_t k = 0; k < impl->n_steps; ++k) {
    const double s0 = static_cast<double>(k) * cfg.dt;
    const double s1 = std::min(static_cast<double>(k + 1) * cfg.dt, cfg.horizon);
    const double u0 = impl->sched.u_at(s0);
    const double u1 = impl->sched.u_at(s1);
    impl->steps.push_back(detail::make_euler_step(-psi_prime(mech, u0), mech.beta(),
                                                  mech.levy().tilted(u0), eps,
                                                  cfg.small_jump_mode));
    const double r0 = impl->branch_rate(u0) + impl->edge_rate(u0);
    const double r1 = impl->branch_rate(u1) + impl->edge_rate(u1);
    impl->bound.push_back(1.05 * std::max(r0, r1));
  }
  impl_ = std::move(impl);
}

const TimeSkeletonSchedule& TSkeleton::schedule() const { return impl_->sched; }

CoupledPath TSkeleton::run(double x, const InitialLaw& init, Rng& rng) const {
  const Impl& im = *impl_;
  PathState st = start_path(x, sample_initial(init, rng), im.mech.beta(), im.cfg.record_path);
  for (std::size_t k = 0; k < im.n_steps; ++k) {
    const double t_end = std::min(static_cast<double>(k + 1) * im.cfg.dt, im.cfg.horizon);
    double clock = st.t;
    for (;;) {
      if (st.Z == 0) break;
      const double bound = static_cast<double>(st.Z) * im.bound[k];
      clock += rng.exponential(bound);
      if (clock >= t_end) break;
      const double u = im.sched.u_at(clock);
      const double q = im.branch_rate(u);
      const double m = im.edge_rate(u);
      const double accept = static_cast<double>(st.Z) * (q + m) / bound;
      if (accept > 1.0) throw NumericalError("T-skeleton: thinning bound exceeded");
      if (rng.uniform() >= accept) continue;
      st.advance(im.steps[k], clock, rng);
      if (rng.uniform() * (q + m) < q) {
        const BranchOutcome b = BranchLaw::horizon(im.mech, u).sample(rng);
        st.branch(b.offspring);
        if (b.immigrant > 0.0) st.immigrate(b.immigrant, SkeletonEvent::Kind::BranchImmigration);
      } else {
        ++st.out.n_edge_immigration;
        st.immigrate(im.mech.levy().sample_weighted(1, u, im.eps, rng),
                     SkeletonEvent::Kind::EdgeImmigration);
      }
    }
    st.advance(im.steps[k], t_end, rng);
    st.mark_grid();
  }
  return st.finish();
}

CoupledPath simulate_lambda_skeleton(const BranchingMechanism& mech, double lambda, double x,
                                     const InitialLaw& init, const PathConfig& cfg, Rng& rng) {
  return LambdaSkeleton(mech, lambda, cfg).run(x, init, rng);
}

CoupledPath simulate_T_skeleton(const BranchingMechanism& mech, double T, double x,
                                const InitialLaw& init, const PathConfig& cfg, Rng& rng) {
  return TSkeleton(mech, T, cfg).run(x, init, rng);
}

std::vector<std::string> coupled_csv_header() { return {"path_id", "t", "lambda_mass", "z_count"}; }
std::vector<std::string> event_csv_header() { return {"path_id", "t", "kind", "offspring", "size"}; }

void write_coupled_rows(CsvWriter& w, std::size_t path_id, const CoupledPath& p) {
  for (std::size_t i = 0; i < p.times.size(); ++i) {
    w << path_id << p.times[i] << p.lambda_mass[i] << static_cast<long long>(p.z_count[i]);
    w.end_row();
  }
}

void write_event_rows(CsvWriter& w, std::size_t path_id, const CoupledPath& p) {
  for (const auto& e : p.events) {
    w << path_id << e.time;
    switch (e.kind) {
      case SkeletonEvent::Kind::Branch: w << "branch"; break;
      case SkeletonEvent::Kind::EdgeImmigration: w << "edge_immigration"; break;
      case SkeletonEvent::Kind::BranchImmigration: w << "branch_immigration"; break;
    }
    w << e.offspring << e.size;
    w.end_row();
  }
}

// ---------------------------------------------------------------------------

SpineLimitResult spine_limit_experiment(const BranchingMechanism& mech, double x, double t,
                                        const std::vector<double>& T_list, std::size_t N,
                                        const PathConfig& cfg, std::uint64_t seed,
                                        unsigned threads,
                                        const std::vector<double>& theta_grid) {
  if (classify(mech) != Criticality::Subcritical) {
    throw DomainError("spine limit: mechanism must be subcritical");
  }
  if (T_list.empty()) throw DomainError("spine limit: empty T list");
  for (std::size_t i = 0; i < T_list.size(); ++i) {
    if (!(T_list[i] > t)) throw DomainError("spine limit: need t < min(T_list)");
    if (i > 0 && !(T_list[i] > T_list[i - 1])) throw DomainError("spine limit: T list must increase");
  }
  if (N < 2) throw DomainError("spine limit: need N >= 2");
  constexpr std::uint32_t kTag = 0x5b1e;

  SpineLimitResult res;
  res.theta_grid = theta_grid;
  for (double th : theta_grid) res.oracle.push_back(laplace_immigration(mech, x, 1, t, th));

  PathConfig run_cfg = cfg;
  run_cfg.horizon = t;
  run_cfg.record_path = false;
  std::vector<std::vector<double>> prev;  // per theta, per path
  for (double T : T_list) {
    const TSkeleton model(mech, T, run_cfg);
    const double uT = u_infinity(mech, T);
    const InitialLaw init = InitialLaw::poisson_positive(uT * x);
    std::vector<double> lam(N);
    std::vector<double> z0_one(N);
    std::vector<double> single(N);
    parallel_for(N, threads, [&](std::size_t i) {
      Rng rng(seed, substream_id(kTag, i));
      const CoupledPath p = model.run(x, init, rng);
      lam[i] = p.final_lambda();
      z0_one[i] = p.z_initial == 1 ? 1.0 : 0.0;
      single[i] = (p.z_initial == 1 && p.z_max == 1 && p.z_min == 1) ? 1.0 : 0.0;
    });
    SpineLimitRow row;
    row.T = T;
    row.u_T = uT;
    const MeanSe a = mean_se(z0_one);
    const MeanSe b = mean_se(single);
    row.p_z0_one = a.mean;
    row.p_z0_one_se = a.se;
    row.p_single_line = b.mean;
    row.p_single_line_se = b.se;
    std::vector<std::vector<double>> cur(theta_grid.size(), std::vector<double>(N));
    for (std::size_t j = 0; j < theta_grid.size(); ++j) {
      for (std::size_t i = 0; i < N; ++i) cur[j][i] = std::exp(-theta_grid[j] * lam[i]);
      const MeanSe m = mean_se(cur[j]);
      row.laplace.push_back(m.mean);
      row.laplace_se.push_back(m.se);
      const double d = std::abs(m.mean - res.oracle[j]);
      if (j == 0 || d > row.d_T) {
        row.d_T = d;
        row.d_T_se = m.se;
      }
      if (!prev.empty()) {
        row.paired_se_prev = std::max(row.paired_se_prev, paired_difference(cur[j], prev[j]).se);
      }
    }
    prev = std::move(cur);
    res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace csbp
