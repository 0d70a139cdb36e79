#include <cmath>
#include <limits>

#include "squeezelab/sde.hpp"

namespace squeezelab {

WindowTables make_window_tables(std::size_t n_samples, double interval,
                                const FrequencyGrid& grid) {
  WindowTables t;
  t.weights.resize(n_samples);
  const double denom = static_cast<double>(n_samples - 1);
  for (std::size_t n = 0; n < n_samples; ++n) {
    t.weights[n] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(n) / denom));
    t.power += t.weights[n] * t.weights[n];
  }
  const std::size_t k_count = grid.size();
  t.w_plus.assign(k_count, cplx{});
  t.w_minus.assign(k_count, cplx{});
  for (std::size_t k = 0; k < k_count; ++k) {
    cplx acc{};
    for (std::size_t n = 0; n < n_samples; ++n) {
      acc += t.weights[n] * std::polar(1.0, -grid.omegas[k] * interval * static_cast<double>(n));
    }
    t.w_plus[k] = interval * acc;
    t.w_minus[k] = std::conj(t.w_plus[k]);
  }
  return t;
}

TransformAccumulator::TransformAccumulator(const WindowTables& tables, const FrequencyGrid& grid,
                                           double interval)
    : tables_(tables), interval_(interval) {
  const std::size_t k_count = grid.size();
  rot_plus_.resize(k_count);
  phase_plus_.assign(k_count, cplx{1.0, 0.0});
  for (std::size_t k = 0; k < k_count; ++k) {
    rot_plus_[k] = std::polar(1.0, -grid.omegas[k] * interval);
  }
  for (int c = 0; c < 2; ++c) {
    out_.plus[c].assign(k_count, cplx{});
    out_.minus[c].assign(k_count, cplx{});
  }
}

void TransformAccumulator::add(const Vector4c& y) {
  const double w = tables_.weights[n_++];
  const cplx y0 = w * y(kA1);
  const cplx y1 = w * y(kA1p);
  const std::size_t k_count = phase_plus_.size();
  for (std::size_t k = 0; k < k_count; ++k) {
    const cplx ph = phase_plus_[k];
    const cplx ph_conj = std::conj(ph);
    out_.plus[0][k] += y0 * ph;
    out_.plus[1][k] += y1 * ph;
    out_.minus[0][k] += y0 * ph_conj;
    out_.minus[1][k] += y1 * ph_conj;
    phase_plus_[k] = ph * rot_plus_[k];
  }
  out_.sum += y;
}

TrajectoryTransform TransformAccumulator::finish() {
  for (int c = 0; c < 2; ++c) {
    for (auto& v : out_.plus[c]) v *= interval_;
    for (auto& v : out_.minus[c]) v *= interval_;
  }
  return std::move(out_);
}

namespace {

struct ScatterAccumulator {
  cplx sum{};
  double sq_re = 0.0, sq_im = 0.0;
  void add(cplx v) {
    sum += v;
    sq_re += v.real() * v.real();
    sq_im += v.imag() * v.imag();
  }
  void finish(std::size_t n, cplx& mean, cplx& se) const {
    const double dn = static_cast<double>(n);
    mean = sum / dn;
    if (n < 2) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      se = {nan, nan};
      return;
    }
    const double var_re = std::max(0.0, (sq_re - dn * mean.real() * mean.real()) / (dn - 1.0));
    const double var_im = std::max(0.0, (sq_im - dn * mean.imag() * mean.imag()) / (dn - 1.0));
    se = {std::sqrt(var_re / dn), std::sqrt(var_im / dn)};
  }
};

}  // namespace

SpectralEstimate combine_transforms(std::span<const TrajectoryTransform> transforms,
                                    const WindowTables& tables, const Vector4c& mean_offset,
                                    double interval, const std::vector<double>& omegas) {
  SpectralEstimate out;
  out.omegas = omegas;
  const std::size_t k_count = omegas.size();
  for (auto* v : {&out.S11, &out.S12, &out.S21, &out.S22, &out.S11_se, &out.S12_se, &out.S21_se,
                  &out.S22_se}) {
    v->assign(k_count, cplx{});
  }
  // E[X_a(w) X_b(-w)] ~ interval * sum(w_n^2) * S_ab(w).
  const double norm = 1.0 / (interval * tables.power);

  const cplx m0 = mean_offset(kA1);
  const cplx m1 = mean_offset(kA1p);
  for (std::size_t k = 0; k < k_count; ++k) {
    ScatterAccumulator acc[4];
    for (const auto& tr : transforms) {
      const cplx xp0 = tr.plus[0][k] - m0 * tables.w_plus[k];
      const cplx xp1 = tr.plus[1][k] - m1 * tables.w_plus[k];
      const cplx xm0 = tr.minus[0][k] - m0 * tables.w_minus[k];
      const cplx xm1 = tr.minus[1][k] - m1 * tables.w_minus[k];
      acc[0].add(norm * xp0 * xm0);
      acc[1].add(norm * xp0 * xm1);
      acc[2].add(norm * xp1 * xm0);
      acc[3].add(norm * xp1 * xm1);
    }
    acc[0].finish(transforms.size(), out.S11[k], out.S11_se[k]);
    acc[1].finish(transforms.size(), out.S12[k], out.S12_se[k]);
    acc[2].finish(transforms.size(), out.S21[k], out.S21_se[k]);
    acc[3].finish(transforms.size(), out.S22[k], out.S22_se[k]);
  }
  return out;
}

}  // namespace squeezelab

namespace squeezelab {

SpectralEstimate estimate_spectra(std::span<const SampleSeries> ensemble,
                                  const FrequencyGrid& grid,
                                  std::optional<double> correlation_time) {
  grid.validate();
  if (ensemble.empty()) {
    throw Error(ErrorKind::insufficient_samples, "no sample series supplied");
  }
  const std::size_t n = ensemble.front().samples.size();
  const double interval = ensemble.front().sample_interval;
  for (const auto& s : ensemble) {
    if (s.samples.size() != n || s.sample_interval != interval) {
      throw Error(ErrorKind::insufficient_samples,
                  "sample series must share length and sampling interval");
    }
  }
  if (n < 16 || !(interval > 0.0)) {
    throw Error(ErrorKind::insufficient_samples, "record needs at least 16 samples");
  }
  if (correlation_time && static_cast<double>(n) * interval < 10.0 * *correlation_time) {
    throw Error(ErrorKind::insufficient_samples,
                "record shorter than 10 correlation times");
  }

  const WindowTables tables = make_window_tables(n, interval, grid);
  std::vector<TrajectoryTransform> transforms;
  transforms.reserve(ensemble.size());
  Vector4c total = Vector4c::Zero();
  for (const auto& s : ensemble) {
    TransformAccumulator acc(tables, grid, interval);
    for (const auto& y : s.samples) acc.add(y);
    transforms.push_back(acc.finish());
    total += transforms.back().sum;
  }
  const Vector4c mean = total / static_cast<double>(n * ensemble.size());
  return combine_transforms(transforms, tables, mean, interval, grid.omegas);
}

SpectralEstimate estimate_spectra(const EnsembleStats& stats) {
  if (stats.transforms.empty() || stats.samples_per_segment < 16) {
    throw Error(ErrorKind::insufficient_samples, "ensemble carries no recorded transforms");
  }
  if (stats.correlation_time &&
      static_cast<double>(stats.samples_per_segment) * stats.sample_interval <
          10.0 * *stats.correlation_time) {
    throw Error(ErrorKind::insufficient_samples, "record shorter than 10 correlation times");
  }
  const FrequencyGrid grid = FrequencyGrid::from_values(stats.spectra.omegas);
  const WindowTables tables =
      make_window_tables(stats.samples_per_segment, stats.sample_interval, grid);
  const Vector4c mean_offset = stats.mean.to_vector() - stats.center;
  return combine_transforms(stats.transforms, tables, mean_offset, stats.sample_interval,
                            grid.omegas);
}

}  // namespace squeezelab
