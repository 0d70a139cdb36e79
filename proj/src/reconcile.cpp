#include "squeezelab/reconcile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "squeezelab/dynamics.hpp"

namespace squeezelab {

Matrix4c drift_matrix_fd(const DriftFunction& drift, const ModelParams& p,
                         const PhaseSpacePoint& x, double rel_step) {
  const Vector4c x0 = x.to_vector();
  Matrix4c A;
  for (int j = 0; j < 4; ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x0(j)));
    Vector4c up = x0, down = x0;
    up(j) += h;
    down(j) -= h;
    const Vector4c f_up = drift(p, PhaseSpacePoint::from_vector(up)).to_vector();
    const Vector4c f_down = drift(p, PhaseSpacePoint::from_vector(down)).to_vector();
    A.col(j) = -(f_up - f_down) / (2.0 * h);
  }
  return A;
}

double cavity_block_deviation(const CavitySpectrum& x, const CavitySpectrum& ref) {
  double worst = 0.0;
  for (std::size_t k = 0; k < ref.omegas.size(); ++k) {
    const double scale = std::max({std::abs(ref.S11[k]), std::abs(ref.S12[k]),
                                   std::abs(ref.S21[k]), std::abs(ref.S22[k])});
    const double diff = std::max({std::abs(x.S11[k] - ref.S11[k]), std::abs(x.S12[k] - ref.S12[k]),
                                  std::abs(x.S21[k] - ref.S21[k]), std::abs(x.S22[k] - ref.S22[k])});
    if (diff == 0.0) continue;
    worst = std::max(worst, scale > 0.0 ? diff / scale : std::numeric_limits<double>::infinity());
  }
  return worst;
}

double quadrature_deviation(const QuadratureSpectrum& x, const QuadratureSpectrum& ref) {
  double worst = 0.0;
  for (std::size_t k = 0; k < ref.omegas.size(); ++k) {
    const double scale = std::max(std::abs(ref.S_plus[k]), std::abs(ref.S_minus[k]));
    const double diff =
        std::max(std::abs(x.S_plus[k] - ref.S_plus[k]), std::abs(x.S_minus[k] - ref.S_minus[k]));
    if (diff == 0.0) continue;
    worst = std::max(worst, scale > 0.0 ? diff / scale : std::numeric_limits<double>::infinity());
  }
  return worst;
}

PhaseSpacePoint drift_fokker_planck_sign(const ModelParams& p, const PhaseSpacePoint& x) {
  PhaseSpacePoint d = drift_nonlinear(p, x);
  const cplx I{0.0, 1.0};
  d.a2p -= 4.0 * I * p.G * x.a2 * x.a2p * x.a2p;
  return d;
}

double density_bisection(const ModelParams& p) {
  const double c = p.effective_damping();
  const double e2 = p.E_mag * p.E_mag;
  if (e2 == 0.0) return 0.0;
  auto f = [&](double x) { return 4.0 * p.G * p.G * x * x * x + c * c * x - e2; };
  double lo = 0.0, hi = e2 / (c * c);
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

double relative(double diff, double scale) {
  if (diff == 0.0) return 0.0;
  return scale > 0.0 ? diff / scale : std::numeric_limits<double>::infinity();
}

ReconciliationEntry check_conjugate_drift(const ModelParams& p, const SteadyState& ss) {
  ReconciliationEntry e;
  e.id = "conjugate_drift_sign";
  e.formula = "sign of the nonlinear term in the a2p drift";
  // Off the fixed point so that the drift is nonzero.
  PhaseSpacePoint x = ss.point();
  x.a2 += cplx{0.3, -0.2} * std::max(1.0, std::abs(ss.a2_0));
  x.a2p = std::conj(x.a2);
  auto conj_defect = [&](const DriftFunction& f) {
    const PhaseSpacePoint d = f(p, x);
    const double scale = std::max(std::abs(d.a2), std::abs(d.a2p));
    return relative(std::abs(d.a2p - std::conj(d.a2)), scale);
  };
  e.printed_deviation = conj_defect(drift_fokker_planck_sign);
  e.corrected_deviation = conj_defect(drift_nonlinear);
  e.printed_consistent = !(e.printed_deviation > 1e-12);
  e.finding = e.printed_consistent
                  ? "no difference at these parameters (G = 0)"
                  : "the Fokker-Planck form of the a2p drift breaks conjugation symmetry; the "
                    "stochastic and deterministic equations carry the conjugate-consistent sign";
  e.correction = "d a2p = -gamma2 a2p + E* + 2iG a2 a2p^2 - g a1p";
  return e;
}

ReconciliationEntry check_noisy_linear_drift(const ModelParams& p, const SteadyState& ss) {
  ReconciliationEntry e;
  e.id = "linearized_drift_matrix";
  e.formula = "exciton block of the drift matrix in the linearized noisy equation";
  const LinearizedSystem lin = linearize(p, ss);
  const Matrix4c fd = drift_matrix_fd(drift_nonlinear, p, ss.point());
  const double scale = std::max(1.0, lin.A.cwiseAbs().maxCoeff());

  // Printed variant: undefined coupling symbol read as g, and the cavity
  // amplitude squared in the off-diagonal exciton entries.
  Matrix4c printed = lin.A;
  const cplx I{0.0, 1.0};
  printed(kA2, kA2p) = 2.0 * I * p.G * ss.a1_0 * ss.a1_0;
  printed(kA2p, kA2) = -2.0 * I * p.G * ss.a1p_0 * ss.a1p_0;

  e.printed_deviation = (printed - fd).cwiseAbs().maxCoeff() / scale;
  e.corrected_deviation = (lin.A - fd).cwiseAbs().maxCoeff() / scale;
  e.printed_consistent = e.printed_deviation <= 1e-6;
  e.finding =
      "printed with an undefined coupling symbol and a1_0^2 in the off-diagonal exciton entries; "
      "the consistent linearization uses g and a2_0^2 (agrees with the finite-difference Jacobian)";
  e.correction = "A(3,4) = 2iG a2_0^2, A(4,3) = -2iG a2p_0^2, coupling entries +-g";
  return e;
}

ReconciliationEntry check_lambda(const ModelParams& p, const SteadyState& ss,
                                 const LinearizedSystem& lin, const FrequencyGrid& grid,
                                 double tol) {
  ReconciliationEntry e;
  e.id = "lambda_denominator";
  e.formula = "Lambda(w) versus |det(A + iwI)|^2";
  const cplx I{0.0, 1.0};
  for (double w : grid.omegas) {
    const double lam = lambda_denominator(p, ss.n2, w);
    const double det_sq = std::norm((lin.A + I * w * Matrix4c::Identity()).determinant());
    e.printed_deviation = std::max(e.printed_deviation, relative(std::abs(lam - det_sq), det_sq));
  }
  e.corrected_deviation = e.printed_deviation;
  e.printed_consistent = e.printed_deviation <= tol;
  e.finding = e.printed_consistent ? "consistent, constant factor 1"
                                   : "Lambda differs from |det(A + iwI)|^2";
  return e;
}

}  // namespace

ReconciliationReport reconcile(const ModelParams& p, const FrequencyGrid& grid, double tolerance) {
  const SteadyState ss = solve_steady_state(p);
  const LinearizedSystem lin = linearize(p, ss);
  const double theta = default_theta(ss);

  ReconciliationReport report;
  report.params = p;
  report.n2 = ss.n2;
  report.tolerance = tolerance;

  report.entries.push_back(check_conjugate_drift(p, ss));
  report.entries.push_back(check_noisy_linear_drift(p, ss));
  report.entries.push_back(check_lambda(p, ss, lin, grid, tolerance));

  const CavitySpectrum canonical = spectrum_matrix(lin, grid);
  const CavitySpectrum printed_cavity = closed_form_cavity_spectra(p, ss, grid);
  {
    ReconciliationEntry e;
    e.id = "cavity_spectra";
    e.formula = "expanded S11, S12 = S21, S22";
    e.printed_deviation = cavity_block_deviation(printed_cavity, canonical);
    e.corrected_deviation = e.printed_deviation;
    e.printed_consistent = e.printed_deviation <= tolerance;
    e.finding = e.printed_consistent ? "consistent with the matrix pipeline"
                                     : "deviates from the matrix pipeline";
    report.entries.push_back(e);
  }

  const QuadratureSpectrum canonical_q = output_quadrature_spectra(canonical, theta, p.gamma1);
  const QuadratureSpectrum printed_q = closed_form_output_spectra(p, ss, grid);
  const QuadratureSpectrum corrected_q = corrected_output_spectra(p, ss, grid);
  {
    ReconciliationEntry e;
    e.id = "output_spectra";
    e.formula = "expanded :S+(w): and :S-(w): at theta = theta1 - pi/4";
    e.printed_deviation = quadrature_deviation(printed_q, canonical_q);
    e.corrected_deviation = quadrature_deviation(corrected_q, canonical_q);
    e.printed_consistent = e.printed_deviation <= tolerance;
    e.finding =
        "the group (g^2+g1 g2)^2 + w^4 + (g1^2+g2^2-2g^2-12G^2 n2^2) w^2 - 12 G^2 n2^2 g1^2 lacks "
        "an overall factor n2, and the S12 contribution is printed as 2G n2^2 (g^2 g1 + g1^2 g2 + "
        "g2 w^2) where the algebra gives 4G n2^2 (...)";
    e.correction =
        "S+- = 8 G g^2 g1 / Lambda * [ +-n2 ((g^2+g1 g2)^2 + w^4 + (g1^2+g2^2-2g^2-12G^2 n2^2) "
        "w^2 - 12 G^2 n2^2 g1^2) + 4 G n2^2 (g^2 g1 + g1^2 g2 + g2 w^2) ]";
    report.entries.push_back(e);
  }
  {
    ReconciliationEntry e;
    e.id = "output_spectra_zero_frequency";
    e.formula = "separately printed :S+(0): and :S-(0):";
    const QuadratureSpectrum canonical0 =
        output_quadrature_spectra(spectrum_matrix(lin, FrequencyGrid::from_values({0.0})), theta,
                                  p.gamma1);
    const double scale = std::max(std::abs(*canonical0.S_plus_0), std::abs(*canonical0.S_minus_0));
    e.printed_deviation =
        relative(std::max(std::abs(*printed_q.S_plus_0 - *canonical0.S_plus_0),
                          std::abs(*printed_q.S_minus_0 - *canonical0.S_minus_0)),
                 scale);
    e.corrected_deviation =
        relative(std::max(std::abs(*corrected_q.S_plus_0 - *canonical0.S_plus_0),
                          std::abs(*corrected_q.S_minus_0 - *canonical0.S_minus_0)),
                 scale);
    e.printed_consistent = e.printed_deviation <= tolerance;
    e.finding = "inherits the missing n2 factor and the 2G -> 4G coefficient of the full spectra";
    e.correction =
        "S+-(0) = 8 G g^2 g1 / Lambda0 * [ +-n2 ((g^2+g1 g2)^2 - 12 G^2 n2^2 g1^2) + 4 G n2^2 "
        "(g^2 g1 + g1^2 g2) ]";
    report.entries.push_back(e);
  }
  {
    ReconciliationEntry e;
    e.id = "squeezing_inequalities";
    e.formula = "zero-frequency squeezing conditions for X+ and X-";
    const SqueezingPrediction printed = squeezing_conditions(p, ss.n2);
    const SqueezingPrediction corrected = squeezing_conditions_corrected(p, ss.n2);
    const QuadratureSpectrum canonical0 =
        output_quadrature_spectra(spectrum_matrix(lin, FrequencyGrid::from_values({0.0})), theta,
                                  p.gamma1);
    const bool canon_plus = canonical0.squeezed_plus;
    const bool canon_minus = canonical0.squeezed_minus;
    const int printed_mismatch = (printed.plus != canon_plus) + (printed.minus != canon_minus);
    const int corrected_mismatch =
        (corrected.plus != canon_plus) + (corrected.minus != canon_minus);
    // Deviations count mismatching predicates (0, 1 or 2) at this point.
    e.printed_deviation = printed.degenerate ? 0.0 : printed_mismatch;
    e.corrected_deviation = corrected.degenerate ? 0.0 : corrected_mismatch;
    e.printed_consistent = e.printed_deviation == 0.0;
    e.finding =
        "the printed inequalities are the sign conditions of the printed zero-frequency spectra "
        "and inherit their factor errors; they may disagree with the canonical sign";
    e.correction =
        "plus: (g^2+g1 g2)^2 + 4 G n2 (g^2 g1 + g1^2 g2) < 12 G^2 n2^2 g1^2; minus: 4 G n2 "
        "(g^2 g1 + g1^2 g2) + 12 G^2 n2^2 g1^2 < (g^2+g1 g2)^2";
    report.entries.push_back(e);
  }
  {
    ReconciliationEntry e;
    e.id = "stability_remark";
    e.formula = "prose stability condition |Re sqrt((g2-g1 +- i2 sqrt3 G n2)^2 - 4g^2)| > g1+g2";
    const double shift = 2.0 * std::sqrt(3.0) * p.G * ss.n2;
    const double diff = p.gamma2 - p.gamma1;
    const cplx z = std::sqrt(cplx{diff, shift} * cplx{diff, shift} - 4.0 * p.g * p.g);
    const bool prose_stable = std::abs(z.real()) > p.gamma1 + p.gamma2;
    const StabilityReport st = stability(p, ss);
    e.printed_deviation = prose_stable != st.stable ? 1.0 : 0.0;
    e.corrected_deviation = 0.0;
    e.printed_consistent = e.printed_deviation == 0.0;
    e.finding =
        "the prose condition is the instability condition; stability requires every eigenvalue "
        "to have a positive real part, which at resonance holds for all valid parameters "
        "(|Re sqrt(.)| < g1 + g2 always)";
    e.correction = "stable iff min Re(lambda_i) > 0";
    report.entries.push_back(e);
  }
  return report;
}

const ReconciliationEntry* ReconciliationReport::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

nlohmann::json ReconciliationReport::to_json() const {
  nlohmann::json j;
  j["params"] = {{"g", params.g},         {"G", params.G},
                 {"E", params.E_mag},     {"E_phase", params.E_phase},
                 {"gamma1", params.gamma1}, {"gamma2", params.gamma2}};
  j["n2"] = n2;
  j["tolerance"] = tolerance;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    j["entries"].push_back({{"id", e.id},
                            {"formula", e.formula},
                            {"finding", e.finding},
                            {"correction", e.correction},
                            {"printed_deviation", e.printed_deviation},
                            {"corrected_deviation", e.corrected_deviation},
                            {"printed_consistent", e.printed_consistent}});
  }
  return j;
}

}  // namespace squeezelab
