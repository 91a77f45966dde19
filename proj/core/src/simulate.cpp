#include "csbp/simulate.hpp"

#include <cmath>

#include "csbp/errors.hpp"
#include "csbp/io.hpp"
#include "csbp/rng.hpp"
#include "euler.hpp"

namespace csbp {

namespace detail {

double EulerStep::advance(double x, double h, Rng& rng, std::vector<JumpRecord>* log,
                          double t) const {
  double next = x + drift * x * h;
  if (diff_var > 0.0) next += std::sqrt(diff_var * x * h) * rng.normal();
  if (tail_rate > 0.0) {
    const auto n = rng.poisson(tail_rate * x * h);
    for (std::int64_t i = 0; i < n; ++i) {
      const double r = jumps.sample_tail(eps, rng);
      next += r;
      if (log) log->push_back({t + h, r, JumpSource::Branching});
    }
  }
  return next > 0.0 ? next : 0.0;
}

EulerStep make_euler_step(double a, double beta, const LevyMeasure& mu, double eps,
                          SmallJumpMode mode, double* dropped_variance) {
  EulerStep st;
  st.eps = eps;
  st.jumps = mu;
  double small_var = 0.0;
  if (!mu.is_none()) {
    st.tail_rate = mu.tail_mass(eps);
    st.drift = a - mu.tail_first_moment(eps);
    small_var = eps > 0.0 ? mu.small_second_moment(eps) : 0.0;
  } else {
    st.drift = a;
  }
  st.diff_var = 2.0 * beta;
  if (mode == SmallJumpMode::Compensate) {
    st.diff_var += small_var;
  } else if (dropped_variance) {
    *dropped_variance = small_var;
  }
  if (!std::isfinite(st.tail_rate) || !std::isfinite(st.drift)) {
    throw DomainError("Euler step: jumps above eps have infinite rate; raise eps_jump");
  }
  return st;
}

double LineImmigration::sample_size(Rng& rng) const {
  return levy.sample_weighted(1, lambda, eps, rng);
}

LineImmigration make_line_immigration(const BranchingMechanism& mech, double lambda, double eps,
                                      bool allow_truncation) {
  LineImmigration im;
  im.drift = 2.0 * mech.beta();
  im.lambda = lambda;
  im.levy = mech.levy();
  if (mech.levy().is_none()) return im;
  const double full = mech.levy().moment(1, lambda, 0.0, std::numeric_limits<double>::infinity());
  if (std::isfinite(full)) {
    im.eps = 0.0;
    im.rate = full;
    return im;
  }
  if (!allow_truncation) {
    throw DomainError(
        "immigration rate \\int r Pi(dr) is infinite; set allow_truncated_immigration to "
        "simulate with jumps below eps_jump removed");
  }
  if (!(eps > 0.0)) throw DomainError("truncated immigration needs eps_jump > 0");
  im.eps = eps;
  im.rate = mech.levy().moment(1, lambda, eps, std::numeric_limits<double>::infinity());
  return im;
}

}  // namespace detail

void PathConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("PathConfig: dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw DomainError("PathConfig: horizon must be positive");
  }
  if (std::isnan(eps_jump)) throw DomainError("PathConfig: eps_jump is NaN");
  if (!(mass_cap > 0.0)) throw DomainError("PathConfig: mass_cap must be positive");
}

double default_eps_jump(const LevyMeasure& levy) {
  if (levy.finite_activity()) return 0.0;
  constexpr double kMaxRate = 1e3;
  double hi = 1.0;
  while (levy.tail_mass(hi) > kMaxRate) hi *= 2.0;
  double lo = hi;
  while (levy.tail_mass(lo) <= kMaxRate) lo /= 2.0;
  for (int i = 0; i < 100 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (levy.tail_mass(mid) > kMaxRate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

struct PathModel::Impl {
  std::vector<detail::EulerStep> steps;  // one per base step, or a single shared one
  std::optional<detail::LineImmigration> immigration;
  std::size_t n_steps = 0;
  bool absorb = true;

  const detail::EulerStep& step(std::size_t k) const {
    return steps.size() == 1 ? steps.front() : steps[k];
  }
};

namespace {

std::size_t count_steps(const PathConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
}

double resolved_eps(const PathConfig& cfg, const LevyMeasure& levy) {
  if (cfg.eps_jump >= 0.0) {
    if (cfg.eps_jump == 0.0 && !levy.finite_activity()) {
      throw DomainError("eps_jump = 0 is not allowed for an infinite-activity measure");
    }
    return cfg.eps_jump;
  }
  return default_eps_jump(levy);
}

}  // namespace

PathModel PathModel::csbp(const BranchingMechanism& mech, const PathConfig& cfg) {
  cfg.validate();
  PathModel m;
  m.cfg_ = cfg;
  auto impl = std::make_shared<Impl>();
  const double eps = resolved_eps(cfg, mech.levy());
  m.cfg_.eps_jump = eps;
  impl->steps.push_back(detail::make_euler_step(mech.alpha(), mech.beta(), mech.levy(), eps,
                                                cfg.small_jump_mode, &m.dropped_variance_));
  impl->n_steps = count_steps(cfg);
  impl->absorb = cfg.absorb_at_zero;
  m.impl_ = std::move(impl);
  return m;
}

PathModel PathModel::spine(const BranchingMechanism& mech, const PathConfig& cfg) {
  cfg.validate();
  if (classify(mech) == Criticality::Supercritical) {
    throw DomainError("spine SDE: mechanism must be critical or subcritical");
  }
  PathModel m = csbp(mech, cfg);
  auto impl = std::make_shared<Impl>(*m.impl_);
  impl->immigration = detail::make_line_immigration(mech, 0.0, m.cfg_.eps_jump,
                                                    cfg.allow_truncated_immigration);
  impl->absorb = false;
  m.impl_ = std::move(impl);
  return m;
}

PathModel PathModel::die_by_T(const BranchingMechanism& mech, double T, const PathConfig& cfg) {
  cfg.validate();
  if (!(cfg.horizon < T)) throw DomainError("die_by_T: horizon must be < T");
  const HorizonGrid grid = horizon_grid(T, cfg.horizon, std::min(0.01, cfg.dt * 10.0));
  if (grid.truncated) {
    throw DomainError("die_by_T: horizon is within 1e-4 T of T; schedule would be truncated");
  }
  const TimeSkeletonSchedule sched = time_schedule(mech, T, grid);
  PathModel m;
  m.cfg_ = cfg;
  const double eps = resolved_eps(cfg, mech.levy());
  m.cfg_.eps_jump = eps;
  auto impl = std::make_shared<Impl>();
  impl->n_steps = count_steps(cfg);
  impl->steps.reserve(impl->n_steps);
  for (std::size_t k = 0; k < impl->n_steps; ++k) {
    // Coefficients frozen at the left end of the step.
    const double u = sched.u_at(static_cast<double>(k) * cfg.dt);
    impl->steps.push_back(detail::make_euler_step(-psi_prime(mech, u), mech.beta(),
                                                  mech.levy().tilted(u), eps,
                                                  cfg.small_jump_mode, &m.dropped_variance_));
  }
  impl->absorb = cfg.absorb_at_zero;
  m.impl_ = std::move(impl);
  return m;
}

TrajectorySample PathModel::run(double x, Rng& rng) const {
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("simulate: x must be >= 0");
  const Impl& im = *impl_;
  TrajectorySample out;
  out.times.push_back(0.0);
  out.mass.push_back(x);
  std::vector<JumpRecord>* log = cfg_.record_path ? &out.jumps : nullptr;
  double X = x;
  double t = 0.0;
  if (X == 0.0 && im.absorb) out.extinction_time = 0.0;
  for (std::size_t k = 0; k < im.n_steps; ++k) {
    if (X == 0.0 && im.absorb) break;
    const double t_next = std::min(static_cast<double>(k + 1) * cfg_.dt, cfg_.horizon);
    const double h = t_next - t;
    if (X > 0.0) X = im.step(k).advance(X, h, rng, log, t);
    if (im.immigration) {
      const auto& imm = *im.immigration;
      X += imm.drift * h;
      if (imm.rate > 0.0) {
        const auto n = rng.poisson(imm.rate * h);
        for (std::int64_t i = 0; i < n; ++i) {
          const double r = imm.sample_size(rng);
          X += r;
          if (log) log->push_back({t_next, r, JumpSource::Immigration});
        }
      }
    }
    t = t_next;
    if (cfg_.record_path) {
      out.times.push_back(t);
      out.mass.push_back(X);
    }
    if (X == 0.0 && im.absorb) out.extinction_time = t;
    if (X > cfg_.mass_cap) {
      out.capped = true;
      break;
    }
  }
  if (!out.capped && X == 0.0 && im.absorb) t = cfg_.horizon;
  if (!cfg_.record_path || out.times.back() != t) {
    out.times.push_back(t);
    out.mass.push_back(X);
  }
  return out;
}

TrajectorySample simulate_csbp(const BranchingMechanism& mech, double x, const PathConfig& cfg,
                               Rng& rng) {
  return PathModel::csbp(mech, cfg).run(x, rng);
}

TrajectorySample simulate_spine_sde(const BranchingMechanism& mech, double x,
                                    const PathConfig& cfg, Rng& rng) {
  return PathModel::spine(mech, cfg).run(x, rng);
}

TrajectorySample simulate_die_by_T(const BranchingMechanism& mech, double T, double x,
                                   const PathConfig& cfg, Rng& rng) {
  return PathModel::die_by_T(mech, T, cfg).run(x, rng);
}

std::vector<std::string> trajectory_csv_header() { return {"path_id", "t", "mass"}; }
std::vector<std::string> jump_csv_header() { return {"path_id", "t", "size", "source"}; }

void write_trajectory_rows(CsvWriter& w, std::size_t path_id, const TrajectorySample& s) {
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    w << path_id << s.times[i] << s.mass[i];
    w.end_row();
  }
}

void write_jump_rows(CsvWriter& w, std::size_t path_id, const TrajectorySample& s) {
  for (const auto& j : s.jumps) {
    w << path_id << j.time << j.size
      << (j.source == JumpSource::Branching ? "branching" : "immigration");
    w.end_row();
  }
}

double sample_feller_exact(const BranchingMechanism& mech, double x, double t, Rng& rng) {
  if (!mech.levy().is_none()) throw DomainError("sample_feller_exact: Pi must be None");
  if (!(x >= 0.0) || !(t >= 0.0)) throw DomainError("sample_feller_exact: need x, t >= 0");
  if (x == 0.0) return 0.0;
  if (t == 0.0) return x;
  // u_t(theta) = c theta / (1 + d theta)
  const double a = mech.alpha();
  const double c = std::exp(a * t);
  const double d = a == 0.0 ? mech.beta() * t : mech.beta() * std::expm1(a * t) / a;
  const auto n = rng.poisson(x * c / d);
  if (n == 0) return 0.0;
  return rng.gamma(static_cast<double>(n), 1.0 / d);
}

}  // namespace csbp
