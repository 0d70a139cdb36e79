#include "squeezelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "squeezelab/dynamics.hpp"

namespace squeezelab {

double max_rate(const ModelParams& p, double n2) {
  return std::max({p.gamma1, p.gamma2, p.g, p.G * n2});
}

double steady_state_tolerance(const ModelParams& p) {
  return 1e-10 * std::max(1.0, p.E_mag);
}

double solve_density(const ModelParams& p) {
  p.validate();
  if (p.E_mag == 0.0) return 0.0;

  const double c = p.effective_damping();
  const double a = 4.0 * p.G * p.G;
  const double e2 = p.E_mag * p.E_mag;
  auto f = [&](double x) { return (a * x * x + c * c) * x - e2; };
  auto df = [&](double x) { return 3.0 * a * x * x + c * c; };

  // f(0) < 0 and f(e2/c^2) = a x^3 >= 0, so the root is bracketed.
  double lo = 0.0;
  double hi = e2 / (c * c);
  if (f(hi) <= 0.0) return hi;

  // f is convex on x >= 0, so Newton from the upper end decreases
  // monotonically; the bracket only guards against rounding.
  double x = hi;
  for (int iter = 0; iter < 200; ++iter) {
    const double fx = f(x);
    if (fx == 0.0) return x;
    if (fx > 0.0) hi = x; else lo = x;
    double next = x - fx / df(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double stationary_residual(const ModelParams& p, const PhaseSpacePoint& point) {
  const PhaseSpacePoint d = drift_nonlinear(p, point);
  return std::max({std::abs(d.a1), std::abs(d.a1p), std::abs(d.a2), std::abs(d.a2p)});
}

SteadyState solve_steady_state(const ModelParams& p) {
  const double n2 = solve_density(p);
  SteadyState ss;
  ss.n2 = n2;
  if (p.E_mag == 0.0) return ss;

  const cplx denom{p.effective_damping(), 2.0 * p.G * n2};
  ss.a2_0 = p.drive() / denom;
  ss.a1_0 = (p.g / p.gamma1) * ss.a2_0;
  ss.a2p_0 = std::conj(ss.a2_0);
  ss.a1p_0 = std::conj(ss.a1_0);
  ss.theta1 = std::arg(ss.a1_0);
  ss.theta2 = std::arg(ss.a2_0);
  ss.residual = stationary_residual(p, ss.point());
  return ss;
}

LinearizedSystem linearize(const ModelParams& p, const SteadyState& ss) {
  p.validate();
  const double residual = stationary_residual(p, ss.point());
  if (!(residual <= steady_state_tolerance(p))) {
    std::ostringstream os;
    os << "steady state does not solve the given parameters (residual " << residual
       << ", tolerance " << steady_state_tolerance(p) << ")";
    throw Error(ErrorKind::inconsistent_steady_state, os.str());
  }

  const cplx I{0.0, 1.0};
  const double n2 = std::real(ss.a2p_0 * ss.a2_0);
  LinearizedSystem lin;
  Matrix4c& A = lin.A;
  A(kA1, kA1) = p.gamma1;
  A(kA1p, kA1p) = p.gamma1;
  A(kA1, kA2) = -p.g;
  A(kA1p, kA2p) = -p.g;
  A(kA2, kA1) = p.g;
  A(kA2p, kA1p) = p.g;
  A(kA2, kA2) = p.gamma2 + 4.0 * I * p.G * n2;
  A(kA2, kA2p) = 2.0 * I * p.G * ss.a2_0 * ss.a2_0;
  A(kA2p, kA2) = -2.0 * I * p.G * ss.a2p_0 * ss.a2p_0;
  A(kA2p, kA2p) = p.gamma2 - 4.0 * I * p.G * n2;

  lin.D(kA2, kA2) = -2.0 * I * p.G * ss.a2_0 * ss.a2_0;
  lin.D(kA2p, kA2p) = 2.0 * I * p.G * ss.a2p_0 * ss.a2p_0;
  return lin;
}

Eigenvalues eigenvalues_closed_form(const ModelParams& p, double n2) {
  p.validate();
  if (!(n2 >= 0.0)) {
    throw Error(ErrorKind::invalid_parameters, "invalid parameter 'n2': must be >= 0");
  }
  const double shift = 2.0 * std::sqrt(3.0) * p.G * n2;
  const double sum = p.gamma1 + p.gamma2;
  const double diff = p.gamma2 - p.gamma1;
  Eigenvalues out;
  for (int branch = 0; branch < 2; ++branch) {
    const cplx s{0.0, branch == 0 ? shift : -shift};
    const cplx root = std::sqrt((diff + s) * (diff + s) - 4.0 * p.g * p.g);
    out[2 * branch] = 0.5 * ((sum + s) + root);
    out[2 * branch + 1] = 0.5 * ((sum + s) - root);
  }
  return out;
}

PolynomialValue characteristic_polynomial(const ModelParams& p, double n2, cplx lambda) {
  const cplx a = p.gamma1 - lambda;
  const cplx b = p.gamma2 - lambda;
  const cplx inner = a * b + p.g * p.g;
  const double k = 12.0 * p.G * p.G * n2 * n2;
  const double inner_scale = std::abs(a) * std::abs(b) + p.g * p.g;
  return {inner * inner + k * a * a, inner_scale * inner_scale + k * std::norm(a)};
}

Eigenvalues numeric_eigenvalues(const Matrix4c& A) {
  Eigen::ComplexEigenSolver<Matrix4c> solver(A, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::eigensolver_failure, "complex eigensolver did not converge");
  }
  Eigenvalues out;
  for (int i = 0; i < 4; ++i) out[i] = solver.eigenvalues()(i);
  return out;
}

double multiset_distance(const Eigenvalues& a, const Eigenvalues& b) {
  std::array<int, 4> perm{0, 1, 2, 3};
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(a[i] - b[perm[i]]));
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

StabilityReport stability(const ModelParams& p, const SteadyState& ss,
                          const StabilityOptions& options) {
  const LinearizedSystem lin = linearize(p, ss);
  StabilityReport report;
  report.eigenvalues_numeric = numeric_eigenvalues(lin.A);
  report.eigenvalues_closed = eigenvalues_closed_form(p, ss.n2);

  report.min_real_part = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (const cplx& l : report.eigenvalues_numeric) {
    report.min_real_part = std::min(report.min_real_part, l.real());
    scale = std::max(scale, std::abs(l));
  }
  report.margin = options.margin >= 0.0 ? options.margin : 1e-12 * max_rate(p, ss.n2);
  report.stable = report.min_real_part > report.margin;

  report.crosscheck_deviation =
      multiset_distance(report.eigenvalues_closed, report.eigenvalues_numeric) /
      std::max(scale, std::numeric_limits<double>::min());
  if (!(report.crosscheck_deviation <= options.crosscheck_tolerance)) {
    report.crosscheck_ok = false;
    std::ostringstream os;
    os << "closed-form and numeric eigenvalues disagree: relative deviation "
       << report.crosscheck_deviation << " exceeds " << options.crosscheck_tolerance;
    report.diagnostic = os.str();
  }
  return report;
}

}  // namespace squeezelab
