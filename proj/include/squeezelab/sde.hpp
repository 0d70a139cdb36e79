#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "squeezelab/linear_spectra.hpp"
#include "squeezelab/model.hpp"

namespace squeezelab {

enum class Scheme { euler_maruyama, semi_implicit_midpoint };
enum class InitialState { steady_state, origin };

const char* to_string(Scheme s);
Scheme parse_scheme(const std::string& name);
const char* to_string(InitialState s);
InitialState parse_initial_state(const std::string& name);

struct SimConfig {
  std::optional<double> dt;           // default 1e-3 / max rate
  std::optional<double> t_transient;  // default 20 / min Re lambda
  double t_record = 200.0;
  std::size_t n_traj = 100;
  std::uint64_t seed = 1;
  std::optional<double> divergence_radius;  // default 1e6 * max(1, |a2_0|)
  Scheme scheme = Scheme::euler_maruyama;
  InitialState initial = InitialState::steady_state;
  double sample_interval = 0.05;  // rounded to a whole number of steps
  std::size_t correlation_lags = 8;
  std::size_t spectral_segments = 1;  // consecutive Hann segments per trajectory record
  std::optional<FrequencyGrid> spectral_grid;  // default: 41 points over +-4 max rate
  std::string dump_path;  // raw trajectory dump when non-empty
  std::size_t threads = 0;
};

/// Cavity-block spectral estimates; `*_se` hold the standard error of the
/// real part in .real() and of the imaginary part in .imag().
struct SpectralEstimate {
  std::vector<double> omegas;
  std::vector<cplx> S11, S12, S21, S22;
  std::vector<cplx> S11_se, S12_se, S21_se, S22_se;
};

/// Hann-windowed Fourier sums of one recorded trajectory at +-w for the
/// cavity components, kept so that the ensemble mean can be removed after
/// all trajectories are in.
struct TrajectoryTransform {
  std::vector<cplx> plus[2];   // X_c(+w_k)
  std::vector<cplx> minus[2];  // X_c(-w_k)
  Vector4c sum = Vector4c::Zero();  // sum of recorded samples
};

struct EnsembleStats {
  PhaseSpacePoint mean_final;   // ensemble mean at the end of the transient
  PhaseSpacePoint mean;         // stationary mean over kept trajectories
  PhaseSpacePoint mean_stderr;  // per component, .real()/.imag() standard errors
  Matrix4c covariance = Matrix4c::Zero();         // <dx_i dx_j>, mean removed
  Matrix4c covariance_stderr = Matrix4c::Zero();  // real/imag standard errors
  std::vector<double> lags;
  std::vector<Matrix4c> corr;  // <dx_i(t+tau) dx_j(t)>
  SpectralEstimate spectra;
  double discarded_fraction = 0.0;
  std::size_t n_kept = 0;
  std::size_t n_discarded = 0;
  double max_relative_step = 0.0;
  double sample_interval = 0.0;
  std::size_t samples_per_trajectory = 0;
  std::size_t samples_per_segment = 0;
  std::optional<double> correlation_time;  // 1 / min Re lambda when known

  // Raw material for estimate_spectra, one entry per kept segment.
  Vector4c center = Vector4c::Zero();  // subtracted before accumulation
  std::vector<TrajectoryTransform> transforms;
};

/// One recorded trajectory, uniformly sampled.
struct SampleSeries {
  double sample_interval = 0.0;
  std::vector<Vector4c> samples;
};

/// Integrates the full positive-P equations (Ito) over an ensemble.
EnsembleStats simulate_nonlinear(const ModelParams& p, const SimConfig& cfg);

/// Integrates d(dx) = -A dx dt + B dW with B the exciton noise factor at the
/// steady state. The midpoint scheme reproduces the Lyapunov covariance
/// exactly for any dt.
EnsembleStats simulate_linearized(const LinearizedSystem& lin, const SteadyState& ss,
                                  const SimConfig& cfg);

/// Recomputes the cavity spectra from the stored per-trajectory transforms.
SpectralEstimate estimate_spectra(const EnsembleStats& stats);

/// Windowed cross-periodogram estimate from explicit sample series. The
/// ensemble mean is removed. Throws Error{insufficient_samples} when a
/// record is shorter than 10 correlation times (if given) or 16 samples.
SpectralEstimate estimate_spectra(std::span<const SampleSeries> ensemble,
                                  const FrequencyGrid& grid,
                                  std::optional<double> correlation_time = std::nullopt);

// Lower-level pieces shared by the simulator and the direct estimator.
struct WindowTables {
  std::vector<double> weights;  // Hann
  double power = 0.0;           // sum of squared weights
  std::vector<cplx> w_plus;     // dt * sum w_n e^{-i w t_n}
  std::vector<cplx> w_minus;
};
WindowTables make_window_tables(std::size_t n_samples, double interval,
                                const FrequencyGrid& grid);

class TransformAccumulator {
 public:
  TransformAccumulator(const WindowTables& tables, const FrequencyGrid& grid, double interval);
  void add(const Vector4c& y);
  TrajectoryTransform finish();

 private:
  const WindowTables& tables_;
  double interval_;
  std::vector<cplx> rot_plus_, phase_plus_;
  TrajectoryTransform out_;
  std::size_t n_ = 0;
};

SpectralEstimate combine_transforms(std::span<const TrajectoryTransform> transforms,
                                    const WindowTables& tables, const Vector4c& mean_offset,
                                    double interval, const std::vector<double>& omegas);

}  // namespace squeezelab
