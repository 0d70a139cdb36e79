#pragma once

#include <optional>
#include <string>
#include <vector>

#include "squeezelab/model.hpp"

namespace squeezelab {

struct FrequencyGrid {
  std::vector<double> omegas;  // strictly increasing
  bool symmetric = false;      // symmetric about 0, and 0 is a grid point

  /// `points` equispaced values over [-omega_max, omega_max]; points must be
  /// odd so that omega = 0 is on the grid.
  static FrequencyGrid symmetric_grid(double omega_max, std::size_t points);
  /// 401 points over +-20 * max_rate(p, n2).
  static FrequencyGrid default_for(const ModelParams& p, double n2);
  static FrequencyGrid from_values(std::vector<double> omegas);

  void validate() const;
  std::optional<std::size_t> zero_index() const;
  std::size_t size() const { return omegas.size(); }
};

/// Where a spectrum came from. `as_printed` marks the published expanded
/// formulas evaluated verbatim; `corrected` marks their re-derived form.
enum class Provenance { canonical, as_printed, corrected };
const char* to_string(Provenance p);

struct CavitySpectrum {
  std::vector<double> omegas;
  std::vector<Matrix4c> S_full;  // canonical pipeline only
  std::vector<cplx> S11, S12, S21, S22;
  std::vector<double> Lambda;    // closed forms only
  std::vector<std::string> point_status;  // empty string means ok
  Provenance provenance = Provenance::canonical;
};

struct QuadratureSpectrum {
  std::vector<double> omegas;
  double theta = 0.0;
  std::vector<double> S_plus, S_minus;
  std::optional<double> S_plus_0, S_minus_0;
  bool squeezed_plus = false;
  bool squeezed_minus = false;
  double max_imag_residue = 0.0;  // relative, before discarding
  Provenance provenance = Provenance::canonical;
};

/// S(w) = (A + iw)^-1 D (A^T - iw)^-1 through LU solves; cavity block per
/// the fixed index ordering.
CavitySpectrum spectrum_matrix(const LinearizedSystem& lin, const FrequencyGrid& grid);

/// Expanded cavity spectra and the common denominator Lambda, as published.
CavitySpectrum closed_form_cavity_spectra(const ModelParams& p, const SteadyState& ss,
                                          const FrequencyGrid& grid);

/// Lambda(w) = |[(gamma1+iw)(gamma2+iw) + g^2]^2 + 12 G^2 n2^2 (gamma1+iw)^2|^2.
double lambda_denominator(const ModelParams& p, double n2, double omega);

/// Default quadrature reference phase theta1 - pi/4.
double default_theta(const SteadyState& ss);

/// Normally ordered output quadrature spectra
///   S+- = 2 gamma1 [+-(e^{-2i theta} S11 + e^{2i theta} S22) + S21 + S12].
/// Throws Error{nonreal_spectrum} if the imaginary residue exceeds 1e-10
/// relative to the magnitude of the summed terms.
QuadratureSpectrum output_quadrature_spectra(const CavitySpectrum& spec, double theta,
                                             double gamma1);

/// Expanded output spectra at theta = theta1 - pi/4, as published,
/// including the separately printed zero-frequency values.
QuadratureSpectrum closed_form_output_spectra(const ModelParams& p, const SteadyState& ss,
                                              const FrequencyGrid& grid);

/// Expanded output spectra re-derived from the cavity spectra: the
/// bracketed group carries a factor n2 and the S12 contribution enters with
/// 4 G n2^2 rather than 2 G n2^2. Matches the canonical pipeline.
QuadratureSpectrum corrected_output_spectra(const ModelParams& p, const SteadyState& ss,
                                            const FrequencyGrid& grid);

struct SqueezingPrediction {
  bool plus = false;
  bool minus = false;
  bool degenerate = false;  // G = 0 or n2 = 0: every spectrum vanishes
};

/// Published zero-frequency squeezing inequalities.
SqueezingPrediction squeezing_conditions(const ModelParams& p, double n2);

/// The same inequalities re-derived from the corrected zero-frequency spectra:
///   plus : (g^2+g1 g2)^2 + 4 G n2 (g^2 g1 + g1^2 g2) < 12 G^2 n2^2 g1^2
///   minus: 4 G n2 (g^2 g1 + g1^2 g2) + 12 G^2 n2^2 g1^2 < (g^2+g1 g2)^2
SqueezingPrediction squeezing_conditions_corrected(const ModelParams& p, double n2);

/// Stationary covariance: solves A s + s A^T = D as a 16-dim linear system.
/// Throws Error{unstable_system} if any eigenvalue of A has Re <= 0.
Matrix4c lyapunov_covariance(const LinearizedSystem& lin);

/// max |A s + s A^T - D|.
double lyapunov_residual(const LinearizedSystem& lin, const Matrix4c& sigma);

/// At most `points` nodes on [-cutoff, cutoff]: a uniform share plus, for
/// each pole w = i lambda of the resolvent, a tan-mapped share clustered on
/// -Im lambda with width Re lambda.
std::vector<double> quadrature_nodes(const LinearizedSystem& lin, double cutoff,
                                     std::size_t points);

/// (1/2pi) * composite trapezoid integral of S(w) over quadrature_nodes.
/// With `tail_correction` the analytic large-|w| tail D/(pi cutoff) of the
/// resolvent expansion is added.
Matrix4c integrated_spectrum(const LinearizedSystem& lin, double cutoff, std::size_t points,
                             bool tail_correction = false);

}  // namespace squeezelab
