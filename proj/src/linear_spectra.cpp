#include "squeezelab/linear_spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>

namespace squeezelab {

namespace {

constexpr double kImagResidueTolerance = 1e-10;
constexpr double kSingularRcond = 1e-14;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

FrequencyGrid FrequencyGrid::symmetric_grid(double omega_max, std::size_t points) {
  if (!(omega_max > 0.0) || !std::isfinite(omega_max)) {
    throw Error(ErrorKind::invalid_config, "invalid grid: omega_max must be finite and > 0");
  }
  if (points < 3 || points % 2 == 0) {
    throw Error(ErrorKind::invalid_config,
                "invalid grid: omega_points must be odd and >= 3 so that omega = 0 is a node");
  }
  FrequencyGrid grid;
  grid.symmetric = true;
  grid.omegas.resize(points);
  const std::size_t half = points / 2;
  for (std::size_t k = 0; k < points; ++k) {
    const double offset = static_cast<double>(static_cast<long long>(k) -
                                              static_cast<long long>(half));
    grid.omegas[k] = omega_max * offset / static_cast<double>(half);
  }
  grid.omegas[half] = 0.0;
  return grid;
}

FrequencyGrid FrequencyGrid::default_for(const ModelParams& p, double n2) {
  return symmetric_grid(20.0 * max_rate(p, n2), 401);
}

FrequencyGrid FrequencyGrid::from_values(std::vector<double> omegas) {
  FrequencyGrid grid;
  grid.omegas = std::move(omegas);
  grid.validate();
  return grid;
}

void FrequencyGrid::validate() const {
  if (omegas.empty()) throw Error(ErrorKind::invalid_config, "invalid grid: no frequencies");
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    if (!std::isfinite(omegas[k])) {
      throw Error(ErrorKind::invalid_config, "invalid grid: non-finite frequency");
    }
    if (k > 0 && !(omegas[k] > omegas[k - 1])) {
      throw Error(ErrorKind::invalid_config, "invalid grid: frequencies must be strictly increasing");
    }
  }
  if (symmetric && !zero_index()) {
    throw Error(ErrorKind::invalid_config, "invalid grid: symmetric grid must contain omega = 0");
  }
}

std::optional<std::size_t> FrequencyGrid::zero_index() const {
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    if (omegas[k] == 0.0) return k;
  }
  return std::nullopt;
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::canonical: return "canonical";
    case Provenance::as_printed: return "as-printed";
    case Provenance::corrected: return "corrected";
  }
  return "unknown";
}

CavitySpectrum spectrum_matrix(const LinearizedSystem& lin, const FrequencyGrid& grid) {
  grid.validate();
  const std::size_t n = grid.size();
  CavitySpectrum out;
  out.provenance = Provenance::canonical;
  out.omegas = grid.omegas;
  out.S_full.resize(n);
  out.S11.resize(n);
  out.S12.resize(n);
  out.S21.resize(n);
  out.S22.resize(n);
  out.point_status.assign(n, "");

  const Matrix4c identity = Matrix4c::Identity();
  const cplx I{0.0, 1.0};
  for (std::size_t k = 0; k < n; ++k) {
    const double w = grid.omegas[k];
    Eigen::PartialPivLU<Matrix4c> left(lin.A + I * w * identity);
    Eigen::PartialPivLU<Matrix4c> right(lin.A - I * w * identity);
    if (!(left.rcond() > kSingularRcond) || !(right.rcond() > kSingularRcond)) {
      std::ostringstream os;
      os << to_string(ErrorKind::singular_matrix) << ": A + i w I is numerically singular at w = "
         << w;
      out.point_status[k] = os.str();
      out.S_full[k].setConstant(cplx{nan(), nan()});
    } else {
      // S = L^-1 D R^-T with R = A - iw, so S^T = R^-1 (L^-1 D)^T.
      const Matrix4c left_solved = left.solve(lin.D);
      out.S_full[k] = right.solve(left_solved.transpose()).transpose();
    }
    out.S11[k] = out.S_full[k](kA1, kA1);
    out.S12[k] = out.S_full[k](kA1, kA1p);
    out.S21[k] = out.S_full[k](kA1p, kA1);
    out.S22[k] = out.S_full[k](kA1p, kA1p);
  }
  return out;
}

double lambda_denominator(const ModelParams& p, double n2, double omega) {
  const cplx s1{p.gamma1, omega};
  const cplx s2{p.gamma2, omega};
  const cplx inner = s1 * s2 + p.g * p.g;
  return std::norm(inner * inner + 12.0 * p.G * p.G * n2 * n2 * s1 * s1);
}

CavitySpectrum closed_form_cavity_spectra(const ModelParams& p, const SteadyState& ss,
                                          const FrequencyGrid& grid) {
  grid.validate();
  const std::size_t n = grid.size();
  CavitySpectrum out;
  out.provenance = Provenance::as_printed;
  out.omegas = grid.omegas;
  out.S11.resize(n);
  out.S12.resize(n);
  out.S21.resize(n);
  out.S22.resize(n);
  out.Lambda.resize(n);
  out.point_status.assign(n, "");

  const cplx I{0.0, 1.0};
  const double G = p.G, g = p.g, g1 = p.gamma1, g2 = p.gamma2, n2 = ss.n2;
  const double g_sq = g * g;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = grid.omegas[k];
    const double lam = lambda_denominator(p, n2, w);
    const double common = 4.0 * G * G * n2 * n2 * (g1 * g1 + w * w);

    const cplx braces11 =
        common + (g_sq + (g1 + I * w) * (g2 + I * w - I * 4.0 * G * n2)) *
                     (g_sq + (g1 - I * w) * (g2 - I * w - I * 4.0 * G * n2));
    const cplx braces22 =
        common + (g_sq + (g1 + I * w) * (g2 + I * w + I * 4.0 * G * n2)) *
                     (g_sq + (g1 - I * w) * (g2 - I * w + I * 4.0 * G * n2));

    out.Lambda[k] = lam;
    out.S11[k] = -I * (2.0 * G * ss.a2_0 * ss.a2_0 * g_sq / lam) * braces11;
    out.S12[k] = 8.0 * G * G * g_sq * n2 * n2 / lam * (g_sq * g1 + g1 * g1 * g2 + w * w * g2);
    out.S21[k] = out.S12[k];
    out.S22[k] = I * (2.0 * G * ss.a2p_0 * ss.a2p_0 * g_sq / lam) * braces22;
  }
  return out;
}

double default_theta(const SteadyState& ss) { return ss.theta1 - 0.25 * kPi; }

QuadratureSpectrum output_quadrature_spectra(const CavitySpectrum& spec, double theta,
                                             double gamma1) {
  const std::size_t n = spec.omegas.size();
  QuadratureSpectrum out;
  out.provenance = spec.provenance;
  out.omegas = spec.omegas;
  out.theta = theta;
  out.S_plus.resize(n);
  out.S_minus.resize(n);

  const cplx rot_minus = std::polar(1.0, -2.0 * theta);
  const cplx rot_plus = std::polar(1.0, 2.0 * theta);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx phase_part = rot_minus * spec.S11[k] + rot_plus * spec.S22[k];
    const cplx cross_part = spec.S21[k] + spec.S12[k];
    const cplx plus = 2.0 * gamma1 * (phase_part + cross_part);
    const cplx minus = 2.0 * gamma1 * (-phase_part + cross_part);

    const double scale = 2.0 * gamma1 *
                         (std::abs(spec.S11[k]) + std::abs(spec.S22[k]) +
                          std::abs(spec.S12[k]) + std::abs(spec.S21[k]));
    const double residue = std::max(std::abs(plus.imag()), std::abs(minus.imag()));
    if (std::isfinite(scale) && scale > 0.0) {
      const double rel = residue / scale;
      out.max_imag_residue = std::max(out.max_imag_residue, rel);
      if (rel > kImagResidueTolerance) {
        std::ostringstream os;
        os << "output quadrature spectrum has relative imaginary residue " << rel
           << " at w = " << spec.omegas[k] << " (tolerance " << kImagResidueTolerance << ")";
        throw Error(ErrorKind::nonreal_spectrum, os.str());
      }
    }
    out.S_plus[k] = plus.real();
    out.S_minus[k] = minus.real();
    if (spec.omegas[k] == 0.0) {
      out.S_plus_0 = out.S_plus[k];
      out.S_minus_0 = out.S_minus[k];
    }
  }
  out.squeezed_plus = out.S_plus_0 && *out.S_plus_0 < 0.0;
  out.squeezed_minus = out.S_minus_0 && *out.S_minus_0 < 0.0;
  return out;
}

QuadratureSpectrum closed_form_output_spectra(const ModelParams& p, const SteadyState& ss,
                                              const FrequencyGrid& grid) {
  grid.validate();
  QuadratureSpectrum out;
  out.provenance = Provenance::as_printed;
  out.omegas = grid.omegas;
  out.theta = default_theta(ss);

  const double G = p.G, g = p.g, g1 = p.gamma1, g2 = p.gamma2, n2 = ss.n2;
  const double g_sq = g * g;
  const double base = (g_sq + g1 * g2) * (g_sq + g1 * g2);
  const double cross = 2.0 * G * n2 * n2 * (g_sq * g1 + g1 * g1 * g2);
  const double kerr = 12.0 * G * G * n2 * n2;
  const double omega2_common = g1 * g1 + g2 * g2 - 2.0 * g_sq - kerr;
  const double omega2_cross = 2.0 * G * g2 * n2 * n2;

  for (double w : grid.omegas) {
    const double pre = 8.0 * G * g_sq * g1 / lambda_denominator(p, n2, w);
    const double w2 = w * w;
    out.S_plus.push_back(pre * (base + w2 * w2 + cross + (omega2_common + omega2_cross) * w2 -
                                kerr * g1 * g1));
    out.S_minus.push_back(pre * (-base - w2 * w2 + cross - (omega2_common - omega2_cross) * w2 +
                                 kerr * g1 * g1));
  }

  // Zero-frequency values as printed separately.
  const double pre0 = 8.0 * G * g1 * g_sq / lambda_denominator(p, n2, 0.0);
  out.S_plus_0 = pre0 * (base + cross - kerr * g1 * g1);
  out.S_minus_0 = pre0 * (-base + cross + kerr * g1 * g1);
  out.squeezed_plus = *out.S_plus_0 < 0.0;
  out.squeezed_minus = *out.S_minus_0 < 0.0;
  return out;
}

QuadratureSpectrum corrected_output_spectra(const ModelParams& p, const SteadyState& ss,
                                            const FrequencyGrid& grid) {
  grid.validate();
  QuadratureSpectrum out;
  out.provenance = Provenance::corrected;
  out.omegas = grid.omegas;
  out.theta = default_theta(ss);

  const double G = p.G, g = p.g, g1 = p.gamma1, g2 = p.gamma2, n2 = ss.n2;
  const double g_sq = g * g;
  const double base = (g_sq + g1 * g2) * (g_sq + g1 * g2);
  const double kerr = 12.0 * G * G * n2 * n2;

  auto evaluate = [&](double w, double sign) {
    const double w2 = w * w;
    const double phase_group =
        n2 * (base + w2 * w2 + (g1 * g1 + g2 * g2 - 2.0 * g_sq - kerr) * w2 - kerr * g1 * g1);
    const double cross_group = 4.0 * G * n2 * n2 * (g_sq * g1 + g1 * g1 * g2 + g2 * w2);
    return 8.0 * G * g_sq * g1 / lambda_denominator(p, n2, w) * (sign * phase_group + cross_group);
  };
  for (double w : grid.omegas) {
    out.S_plus.push_back(evaluate(w, 1.0));
    out.S_minus.push_back(evaluate(w, -1.0));
  }
  out.S_plus_0 = evaluate(0.0, 1.0);
  out.S_minus_0 = evaluate(0.0, -1.0);
  out.squeezed_plus = *out.S_plus_0 < 0.0;
  out.squeezed_minus = *out.S_minus_0 < 0.0;
  return out;
}

SqueezingPrediction squeezing_conditions(const ModelParams& p, double n2) {
  SqueezingPrediction out;
  if (!(p.G > 0.0) || !(n2 > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const double g_sq = p.g * p.g, g1 = p.gamma1, g2 = p.gamma2, G = p.G;
  const double base = (g_sq + g1 * g2) * (g_sq + g1 * g2);
  const double cross = 2.0 * G * n2 * n2 * (g_sq * g1 + g1 * g1 * g2);
  const double kerr = 12.0 * G * G * n2 * n2 * g1 * g1;
  out.plus = base + cross < kerr;
  out.minus = cross + kerr < base;
  return out;
}

SqueezingPrediction squeezing_conditions_corrected(const ModelParams& p, double n2) {
  SqueezingPrediction out;
  if (!(p.G > 0.0) || !(n2 > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const double g_sq = p.g * p.g, g1 = p.gamma1, g2 = p.gamma2, G = p.G;
  const double base = (g_sq + g1 * g2) * (g_sq + g1 * g2);
  const double cross = 4.0 * G * n2 * (g_sq * g1 + g1 * g1 * g2);
  const double kerr = 12.0 * G * G * n2 * n2 * g1 * g1;
  out.plus = base + cross < kerr;
  out.minus = cross + kerr < base;
  return out;
}

Matrix4c lyapunov_covariance(const LinearizedSystem& lin) {
  const Eigenvalues eig = numeric_eigenvalues(lin.A);
  for (const cplx& l : eig) {
    if (!(l.real() > 0.0)) {
      std::ostringstream os;
      os << "drift matrix has an eigenvalue with Re <= 0 (" << l.real() << " + " << l.imag()
         << "i); no stationary covariance";
      throw Error(ErrorKind::unstable_system, os.str());
    }
  }

  using Matrix16c = Eigen::Matrix<cplx, 16, 16>;
  using Vector16c = Eigen::Matrix<cplx, 16, 1>;
  // Column-major vec: vec(A s + s A^T) = (I (x) A + A (x) I) vec(s).
  Matrix16c K = Matrix16c::Zero();
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) {
      const int row = i + 4 * j;
      for (int k = 0; k < 4; ++k) {
        K(row, k + 4 * j) += lin.A(i, k);
        K(row, i + 4 * k) += lin.A(j, k);
      }
    }
  }
  const Vector16c rhs = Eigen::Map<const Vector16c>(lin.D.data());
  const Vector16c sol = K.partialPivLu().solve(rhs);
  Matrix4c sigma = Eigen::Map<const Matrix4c>(sol.data());
  return sigma;
}

double lyapunov_residual(const LinearizedSystem& lin, const Matrix4c& sigma) {
  return (lin.A * sigma + sigma * lin.A.transpose() - lin.D).cwiseAbs().maxCoeff();
}

std::vector<double> quadrature_nodes(const LinearizedSystem& lin, double cutoff,
                                     std::size_t points) {
  std::vector<std::pair<double, double>> poles;  // (centre, half-width) of each resolvent pole
  for (cplx l : numeric_eigenvalues(lin.A)) {
    if (l.real() > 0.0 && std::isfinite(l.real())) poles.emplace_back(-l.imag(), l.real());
  }
  const std::size_t share = points / (poles.size() + 1);
  const std::size_t uniform = points - share * poles.size();
  std::vector<double> nodes;
  nodes.reserve(points);
  for (std::size_t k = 0; k < uniform; ++k) {
    nodes.push_back(-cutoff + 2.0 * cutoff * static_cast<double>(k) / static_cast<double>(uniform - 1));
  }
  for (auto [c, w] : poles) {
    const double lo = std::atan((-cutoff - c) / w), hi = std::atan((cutoff - c) / w);
    for (std::size_t k = 1; k + 1 < share; ++k) {
      const double u = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(share - 1);
      nodes.push_back(std::clamp(c + w * std::tan(u), -cutoff, cutoff));
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

Matrix4c integrated_spectrum(const LinearizedSystem& lin, double cutoff, std::size_t points,
                             bool tail_correction) {
  if (points < 2) throw Error(ErrorKind::invalid_config, "integrated_spectrum needs >= 2 points");
  FrequencyGrid grid;
  grid.omegas = quadrature_nodes(lin, cutoff, points);
  const CavitySpectrum spec = spectrum_matrix(lin, grid);
  Matrix4c total = Matrix4c::Zero();
  for (std::size_t k = 0; k + 1 < grid.omegas.size(); ++k) {
    total += 0.5 * (grid.omegas[k + 1] - grid.omegas[k]) * (spec.S_full[k] + spec.S_full[k + 1]);
  }
  total /= 2.0 * kPi;
  if (tail_correction) total += lin.D / (kPi * cutoff);
  return total;
}

}  // namespace squeezelab
