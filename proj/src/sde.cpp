#include "squeezelab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "squeezelab/dynamics.hpp"
#include "squeezelab/parallel.hpp"
#include "squeezelab/trajectory_dump.hpp"

namespace squeezelab {

const char* to_string(Scheme s) {
  return s == Scheme::euler_maruyama ? "euler_maruyama" : "semi_implicit_midpoint";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "euler_maruyama") return Scheme::euler_maruyama;
  if (name == "semi_implicit_midpoint") return Scheme::semi_implicit_midpoint;
  throw Error(ErrorKind::invalid_config, "unknown scheme '" + name +
                                             "' (expected euler_maruyama or semi_implicit_midpoint)");
}

const char* to_string(InitialState s) {
  return s == InitialState::steady_state ? "steady_state" : "origin";
}

InitialState parse_initial_state(const std::string& name) {
  if (name == "steady_state") return InitialState::steady_state;
  if (name == "origin") return InitialState::origin;
  throw Error(ErrorKind::invalid_config,
              "unknown initial state '" + name + "' (expected steady_state or origin)");
}

namespace {

double inf_norm(const Vector4c& v) { return v.cwiseAbs().maxCoeff(); }

// Everything a single trajectory needs, resolved once per ensemble.
struct Plan {
  double dt = 0.0;
  std::uint64_t transient_steps = 0;
  std::uint64_t stride = 1;
  std::size_t n_samples = 0;
  std::size_t segments = 1, segment_samples = 0;
  std::size_t lags = 0;
  double radius = 0.0;
  double ref_scale = 1.0;
  Vector4c start = Vector4c::Zero();
  Vector4c record_offset = Vector4c::Zero();  // y = x - record_offset
  Vector4c absolute_shift = Vector4c::Zero(); // absolute = x + absolute_shift
  std::uint64_t seed = 0;
  bool dump = false;
  const WindowTables* tables = nullptr;
  const FrequencyGrid* grid = nullptr;
  double interval = 0.0;
};

struct TrajectoryOutput {
  bool diverged = false;
  Vector4c at_transient_end = Vector4c::Zero();
  double max_rel_step = 0.0;
  std::vector<TrajectoryTransform> segments;
  Vector4c total = Vector4c::Zero();
  std::vector<Matrix4c> lag_products;
  std::vector<Vector4c> head, tail;
  std::vector<TrajectoryRecord> dump;
};

std::mt19937_64 trajectory_engine(std::uint64_t seed, std::size_t index) {
  const auto idx = static_cast<std::uint64_t>(index);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32),
                    0x5153u};
  return std::mt19937_64(seq);
}

template <class Stepper>
TrajectoryOutput run_trajectory(const Plan& plan, Stepper& step, std::size_t index) {
  TrajectoryOutput out;
  auto engine = trajectory_engine(plan.seed, index);
  std::normal_distribution<double> normal(0.0, std::sqrt(plan.dt));

  std::optional<TransformAccumulator> transform;
  std::size_t in_segment = 0;
  out.lag_products.assign(plan.lags + 1, Matrix4c::Zero());
  std::deque<Vector4c> recent;  // last `lags` samples, newest at back
  std::vector<Vector4c> first;
  Vector4c total = Vector4c::Zero();

  Vector4c x = plan.start;
  const std::uint64_t total_steps =
      plan.transient_steps + plan.stride * static_cast<std::uint64_t>(plan.n_samples);
  if (plan.transient_steps == 0) out.at_transient_end = x + plan.absolute_shift;

  for (std::uint64_t s = 0; s < total_steps; ++s) {
    const double dw2 = normal(engine);
    const double dw2p = normal(engine);
    const Vector4c prev = x;
    step(x, dw2, dw2p);

    const double size = inf_norm(x + plan.absolute_shift);
    if (!std::isfinite(size) || size > plan.radius) {
      out.diverged = true;
      return out;
    }
    const double move = inf_norm(x - prev) / std::max(inf_norm(prev + plan.absolute_shift),
                                                      plan.ref_scale);
    out.max_rel_step = std::max(out.max_rel_step, move);

    const std::uint64_t done = s + 1;
    if (done == plan.transient_steps) out.at_transient_end = x + plan.absolute_shift;
    if (done <= plan.transient_steps || (done - plan.transient_steps) % plan.stride != 0) continue;

    const Vector4c y = x - plan.record_offset;
    if (out.segments.size() < plan.segments) {
      if (!transform) transform.emplace(*plan.tables, *plan.grid, plan.interval);
      transform->add(y);
      if (++in_segment == plan.segment_samples) {
        out.segments.push_back(transform->finish());
        transform.reset();
        in_segment = 0;
      }
    }
    total += y;
    out.lag_products[0] += y * y.transpose();
    for (std::size_t k = 1; k <= plan.lags && k <= recent.size(); ++k) {
      out.lag_products[k] += y * recent[recent.size() - k].transpose();
    }
    if (plan.lags > 0) {
      recent.push_back(y);
      if (recent.size() > plan.lags) recent.pop_front();
      if (first.size() < plan.lags) first.push_back(y);
    }
    if (plan.dump) {
      out.dump.push_back({static_cast<std::uint32_t>(index), done,
                          PhaseSpacePoint::from_vector(x + plan.absolute_shift)});
    }
  }

  out.total = total;
  out.head.assign(plan.lags + 1, total);
  out.tail.assign(plan.lags + 1, total);
  for (std::size_t k = 1; k <= plan.lags; ++k) {
    // head_k sums y(0..N-1-k), tail_k sums y(k..N-1).
    out.head[k] = out.head[k - 1] - recent[recent.size() - k];
    out.tail[k] = out.tail[k - 1] - first[k - 1];
  }
  return out;
}

struct ResolvedRun {
  Plan plan;
  std::optional<double> correlation_time;
  FrequencyGrid grid;
};

void check_positive(const char* key, double v) {
  if (!std::isfinite(v) || !(v > 0.0)) {
    std::ostringstream os;
    os << "invalid config '" << key << "': must be finite and > 0 (got " << v << ")";
    throw Error(ErrorKind::invalid_config, os.str());
  }
}

// Shared config resolution; `rate` bounds dt, `min_re` is the slowest decay
// rate when stability is known.
ResolvedRun resolve(const SimConfig& cfg, double rate, std::optional<double> min_re,
                    double fallback_relax) {
  ResolvedRun r;
  Plan& plan = r.plan;
  plan.dt = cfg.dt.value_or(1e-3 / rate);
  check_positive("dt", plan.dt);
  if (plan.dt > 0.1 / rate * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "invalid config 'dt': " << plan.dt << " exceeds 0.1 / max rate = " << 0.1 / rate;
    throw Error(ErrorKind::invalid_config, os.str());
  }
  check_positive("t_record", cfg.t_record);
  check_positive("sample_interval", cfg.sample_interval);
  if (cfg.n_traj < 1) throw Error(ErrorKind::invalid_config, "invalid config 'n_traj': must be >= 1");
  if (min_re) {
    r.correlation_time = 1.0 / *min_re;
    if (cfg.t_record < 50.0 * *r.correlation_time) {
      std::ostringstream os;
      os << "invalid config 't_record': " << cfg.t_record
         << " is shorter than 50 correlation times (" << 50.0 * *r.correlation_time << ")";
      throw Error(ErrorKind::invalid_config, os.str());
    }
  }
  const double transient =
      cfg.t_transient.value_or(min_re ? 20.0 / *min_re : 20.0 / fallback_relax);
  if (!std::isfinite(transient) || transient < 0.0) {
    throw Error(ErrorKind::invalid_config, "invalid config 't_transient': must be >= 0");
  }
  plan.transient_steps = static_cast<std::uint64_t>(std::ceil(transient / plan.dt - 1e-9));
  plan.stride = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(cfg.sample_interval / plan.dt)));
  plan.interval = plan.dt * static_cast<double>(plan.stride);
  plan.n_samples = static_cast<std::size_t>(std::floor(cfg.t_record / plan.interval + 1e-9));
  if (plan.n_samples < 16) {
    throw Error(ErrorKind::insufficient_samples, "t_record / sample_interval gives fewer than 16 samples");
  }
  if (cfg.spectral_segments < 1) {
    throw Error(ErrorKind::invalid_config, "invalid config 'spectral_segments': must be >= 1");
  }
  plan.segments = cfg.spectral_segments;
  plan.segment_samples = plan.n_samples / plan.segments;
  if (plan.segment_samples < 16) {
    throw Error(ErrorKind::insufficient_samples, "spectral segment holds fewer than 16 samples");
  }
  if (r.correlation_time && static_cast<double>(plan.segment_samples) * plan.interval <
                                10.0 * *r.correlation_time) {
    throw Error(ErrorKind::insufficient_samples, "record shorter than 10 correlation times");
  }
  plan.lags = std::min(cfg.correlation_lags, plan.n_samples - 1);
  plan.seed = cfg.seed;
  plan.dump = !cfg.dump_path.empty();
  r.grid = cfg.spectral_grid ? *cfg.spectral_grid : FrequencyGrid::symmetric_grid(4.0 * rate, 41);
  r.grid.validate();
  return r;
}

template <class StepperFactory>
EnsembleStats run_ensemble(const SimConfig& cfg, ResolvedRun& run, StepperFactory make_stepper) {
  Plan& plan = run.plan;
  const WindowTables tables = make_window_tables(plan.segment_samples, plan.interval, run.grid);
  plan.tables = &tables;
  plan.grid = &run.grid;

  std::vector<TrajectoryOutput> outputs(cfg.n_traj);
  parallel_for(cfg.n_traj, resolve_threads(cfg.threads), [&](std::size_t i) {
    auto stepper = make_stepper();
    outputs[i] = run_trajectory(plan, stepper, i);
  });

  if (plan.dump) {
    TrajectoryDumpWriter writer(cfg.dump_path);
    for (const auto& o : outputs) {
      for (const auto& r : o.dump) writer.write(r);
    }
    writer.close();
  }

  EnsembleStats stats;
  stats.sample_interval = plan.interval;
  stats.samples_per_trajectory = plan.n_samples;
  stats.samples_per_segment = plan.segment_samples;
  stats.correlation_time = run.correlation_time;
  stats.center = plan.record_offset + plan.absolute_shift;

  std::vector<const TrajectoryOutput*> kept;
  for (const auto& o : outputs) {
    if (o.diverged) {
      ++stats.n_discarded;
    } else {
      kept.push_back(&o);
      stats.max_relative_step = std::max(stats.max_relative_step, o.max_rel_step);
    }
  }
  stats.n_kept = kept.size();
  stats.discarded_fraction =
      static_cast<double>(stats.n_discarded) / static_cast<double>(cfg.n_traj);
  if (kept.empty()) {
    throw Error(ErrorKind::all_trajectories_diverged,
                "all " + std::to_string(cfg.n_traj) + " trajectories exceeded the divergence radius");
  }
  if (stats.max_relative_step > 0.5) {
    std::ostringstream os;
    os << "largest single-step relative move " << stats.max_relative_step
       << " exceeds 0.5; reduce dt";
    throw Error(ErrorKind::step_too_large, os.str());
  }

  const double n_kept = static_cast<double>(kept.size());
  const double n_samples = static_cast<double>(plan.n_samples);

  // Mean (in recorded coordinates) and its scatter.
  Vector4c y_mean = Vector4c::Zero();
  Vector4c final_mean = Vector4c::Zero();
  for (const auto* o : kept) {
    y_mean += o->total;
    final_mean += o->at_transient_end;
  }
  y_mean /= n_kept * n_samples;
  stats.mean_final = PhaseSpacePoint::from_vector(final_mean / n_kept);
  stats.mean = PhaseSpacePoint::from_vector(plan.record_offset + plan.absolute_shift + y_mean);

  Vector4c se = Vector4c::Zero();
  if (kept.size() > 1) {
    for (int c = 0; c < 4; ++c) {
      double sq_re = 0.0, sq_im = 0.0;
      for (const auto* o : kept) {
        const cplx d = o->total(c) / n_samples - y_mean(c);
        sq_re += d.real() * d.real();
        sq_im += d.imag() * d.imag();
      }
      se(c) = {std::sqrt(sq_re / (n_kept - 1.0) / n_kept), std::sqrt(sq_im / (n_kept - 1.0) / n_kept)};
    }
  }
  stats.mean_stderr = PhaseSpacePoint::from_vector(se);

  // Lagged correlations with the global mean removed.
  const Vector4c& m = y_mean;
  stats.lags.resize(plan.lags + 1);
  stats.corr.assign(plan.lags + 1, Matrix4c::Zero());
  Eigen::Matrix4d sq_re = Eigen::Matrix4d::Zero(), sq_im = Eigen::Matrix4d::Zero();
  for (std::size_t k = 0; k <= plan.lags; ++k) {
    stats.lags[k] = static_cast<double>(k) * plan.interval;
    const double pairs = n_samples - static_cast<double>(k);
    for (const auto* o : kept) {
      const Matrix4c c = (o->lag_products[k] - o->tail[k] * m.transpose() -
                          m * o->head[k].transpose() + pairs * m * m.transpose()) /
                         pairs;
      stats.corr[k] += c;
      if (k == 0) {
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) {
            sq_re(i, j) += c(i, j).real() * c(i, j).real();
            sq_im(i, j) += c(i, j).imag() * c(i, j).imag();
          }
        }
      }
    }
    stats.corr[k] /= n_kept;
  }
  stats.covariance = stats.corr[0];
  if (kept.size() > 1) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const cplx mu = stats.covariance(i, j);
        const double var_re =
            std::max(0.0, (sq_re(i, j) - n_kept * mu.real() * mu.real()) / (n_kept - 1.0));
        const double var_im =
            std::max(0.0, (sq_im(i, j) - n_kept * mu.imag() * mu.imag()) / (n_kept - 1.0));
        stats.covariance_stderr(i, j) = {std::sqrt(var_re / n_kept), std::sqrt(var_im / n_kept)};
      }
    }
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    stats.covariance_stderr.setConstant(cplx{nan, nan});
  }

  stats.transforms.reserve(kept.size() * plan.segments);
  for (const auto* o : kept) {
    stats.transforms.insert(stats.transforms.end(), o->segments.begin(), o->segments.end());
  }
  stats.spectra = combine_transforms(stats.transforms, tables, y_mean, plan.interval, run.grid.omegas);
  return stats;
}

}  // namespace

EnsembleStats simulate_nonlinear(const ModelParams& p, const SimConfig& cfg) {
  p.validate();
  const SteadyState ss = solve_steady_state(p);
  std::optional<double> min_re;
  const StabilityReport st = stability(p, ss);
  if (st.stable) min_re = st.min_real_part;

  const double rate = max_rate(p, ss.n2);
  ResolvedRun run = resolve(cfg, rate, min_re, std::min(p.gamma1, p.gamma2));
  Plan& plan = run.plan;
  const Vector4c steady = ss.point().to_vector();
  plan.radius = cfg.divergence_radius.value_or(1e6 * std::max(1.0, std::abs(ss.a2_0)));
  check_positive("divergence_radius", plan.radius);
  plan.ref_scale = std::max(1.0, inf_norm(steady));
  plan.start = cfg.initial == InitialState::steady_state ? steady : Vector4c::Zero();
  plan.record_offset = steady;
  plan.absolute_shift = Vector4c::Zero();

  const double dt = plan.dt;
  const Scheme scheme = cfg.scheme;
  auto make_stepper = [&p, dt, scheme] {
    return [&p, dt, scheme](Vector4c& x, double dw2, double dw2p) {
      const PhaseSpacePoint here = PhaseSpacePoint::from_vector(x);
      const NoiseAmplitudes b = noise_amplitudes(p, here);
      Vector4c noise = Vector4c::Zero();
      noise(kA2) = b.b2 * dw2;
      noise(kA2p) = b.b2p * dw2p;
      const Vector4c euler = x + drift_nonlinear(p, here).to_vector() * dt + noise;
      if (scheme == Scheme::euler_maruyama) {
        x = euler;
        return;
      }
      // Implicit midpoint in the drift only; the noise stays at the left
      // point to keep the Ito interpretation.
      Vector4c next = euler;
      for (int it = 0; it < 3; ++it) {
        const Vector4c mid = 0.5 * (x + next);
        next = x + drift_nonlinear(p, PhaseSpacePoint::from_vector(mid)).to_vector() * dt + noise;
      }
      x = next;
    };
  };
  return run_ensemble(cfg, run, make_stepper);
}

EnsembleStats simulate_linearized(const LinearizedSystem& lin, const SteadyState& ss,
                                  const SimConfig& cfg) {
  const Eigenvalues eig = numeric_eigenvalues(lin.A);
  double min_re = std::numeric_limits<double>::infinity();
  for (const cplx& l : eig) min_re = std::min(min_re, l.real());
  if (!(min_re > 0.0)) {
    std::ostringstream os;
    os << "linearized system is not stable (min Re lambda = " << min_re << ")";
    throw Error(ErrorKind::unstable_system, os.str());
  }

  const double rate = lin.A.cwiseAbs().maxCoeff();
  ResolvedRun run = resolve(cfg, rate, min_re, min_re);
  Plan& plan = run.plan;
  const Vector4c steady = ss.point().to_vector();
  plan.radius = cfg.divergence_radius.value_or(1e6 * std::max(1.0, std::abs(ss.a2_0)));
  check_positive("divergence_radius", plan.radius);
  plan.ref_scale = std::max(1.0, inf_norm(steady));
  plan.start = Vector4c::Zero();
  plan.record_offset = Vector4c::Zero();
  plan.absolute_shift = steady;

  // Noise factor from D = diag(0, 0, b2^2, b2p^2) with the branch that
  // follows the amplitude: b2 = e^{-i pi/4} sqrt(2G) a2_0.
  auto branch = [](cplx d, cplx amp, double quarter) -> cplx {
    if (amp == cplx{} || d == cplx{}) return {};
    return std::polar(std::sqrt(std::abs(d)), quarter) * (amp / std::abs(amp));
  };
  const cplx b2 = branch(lin.D(kA2, kA2), ss.a2_0, -0.25 * kPi);
  const cplx b2p = branch(lin.D(kA2p, kA2p), ss.a2p_0, 0.25 * kPi);

  const double dt = plan.dt;
  const Matrix4c identity = Matrix4c::Identity();
  Matrix4c propagate = identity - lin.A * dt;
  Vector4c col2 = Vector4c::Zero(), col3 = Vector4c::Zero();
  col2(kA2) = b2;
  col3(kA2p) = b2p;
  if (cfg.scheme == Scheme::semi_implicit_midpoint) {
    const Eigen::PartialPivLU<Matrix4c> lu(identity + 0.5 * dt * lin.A);
    propagate = lu.solve(identity - 0.5 * dt * lin.A);
    col2 = lu.solve(col2);
    col3 = lu.solve(col3);
  }
  auto make_stepper = [propagate, col2, col3] {
    return [propagate, col2, col3](Vector4c& x, double dw2, double dw2p) {
      x = propagate * x + col2 * dw2 + col3 * dw2p;
    };
  };
  return run_ensemble(cfg, run, make_stepper);
}

}  // namespace squeezelab
