#pragma once

#include <array>
#include <string>

#include "squeezelab/params.hpp"

namespace squeezelab {

struct SteadyState {
  cplx a1_0{}, a1p_0{}, a2_0{}, a2p_0{};
  double n2 = 0.0;      // |a2_0|^2
  double theta1 = 0.0;  // arg a1_0
  double theta2 = 0.0;  // arg a2_0
  double residual = 0.0;  // max-norm of the stationary equations

  PhaseSpacePoint point() const { return {a1_0, a1p_0, a2_0, a2p_0}; }
};

/// Drift matrix A and diffusion matrix D of d(dx) = -A dx dt + D^{1/2} dW,
/// in the fixed (a1, a1p, a2, a2p) ordering.
struct LinearizedSystem {
  Matrix4c A = Matrix4c::Zero();
  Matrix4c D = Matrix4c::Zero();
};

using Eigenvalues = std::array<cplx, 4>;

struct StabilityReport {
  Eigenvalues eigenvalues_closed{};
  Eigenvalues eigenvalues_numeric{};
  bool stable = false;
  double min_real_part = 0.0;
  double margin = 0.0;
  double crosscheck_deviation = 0.0;  // relative multiset distance
  bool crosscheck_ok = true;
  std::string diagnostic;  // non-empty when the cross-check failed
};

struct StabilityOptions {
  // Negative means "use 1e-12 * max rate".
  double margin = -1.0;
  double crosscheck_tolerance = 1e-8;
};

/// Largest rate in the problem, max(gamma1, gamma2, g, G n2).
double max_rate(const ModelParams& p, double n2);

/// Stationary tolerance for the max-norm residual: 1e-10 * max(1, |E|).
double steady_state_tolerance(const ModelParams& p);

/// Unique nonnegative root of 4G^2 x^3 + c^2 x - |E|^2 = 0 with
/// c = gamma2 + g^2/gamma1 (the stationary exciton density).
/// Safeguarded Newton on a monotone cubic.
double solve_density(const ModelParams& p);

SteadyState solve_steady_state(const ModelParams& p);

/// Residual max-norm of the stationary equations at `point`.
double stationary_residual(const ModelParams& p, const PhaseSpacePoint& point);

/// Throws Error{inconsistent_steady_state} when ss does not solve p.
LinearizedSystem linearize(const ModelParams& p, const SteadyState& ss);

/// Closed-form roots of the characteristic polynomial
///   [(gamma1-l)(gamma2-l) + g^2]^2 + 12 G^2 n2^2 (gamma1-l)^2.
/// Order: the (+i) pair with + and - square roots, then the (-i) pair.
Eigenvalues eigenvalues_closed_form(const ModelParams& p, double n2);

/// Characteristic polynomial value and a magnitude scale (sum of absolute
/// values of its terms) for residual checks.
struct PolynomialValue {
  cplx value;
  double scale;
};
PolynomialValue characteristic_polynomial(const ModelParams& p, double n2, cplx lambda);

/// General complex eigensolver; throws Error{eigensolver_failure}.
Eigenvalues numeric_eigenvalues(const Matrix4c& A);

/// Smallest achievable max-norm distance between two 4-element multisets.
double multiset_distance(const Eigenvalues& a, const Eigenvalues& b);

StabilityReport stability(const ModelParams& p, const SteadyState& ss,
                          const StabilityOptions& options = {});

}  // namespace squeezelab
