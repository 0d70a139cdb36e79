#include "squeezelab/dynamics.hpp"

#include <cmath>

namespace squeezelab {

PhaseSpacePoint drift_nonlinear(const ModelParams& p, const PhaseSpacePoint& x) {
  const cplx I{0.0, 1.0};
  const cplx E = p.drive();
  return {
      -p.gamma1 * x.a1 + p.g * x.a2,
      -p.gamma1 * x.a1p + p.g * x.a2p,
      -p.gamma2 * x.a2 + E - 2.0 * I * p.G * x.a2p * x.a2 * x.a2 - p.g * x.a1,
      -p.gamma2 * x.a2p + std::conj(E) + 2.0 * I * p.G * x.a2 * x.a2p * x.a2p -
          p.g * x.a1p,
  };
}

NoiseAmplitudes noise_amplitudes(const ModelParams& p, const PhaseSpacePoint& x) {
  static const cplx minus_quarter = std::polar(1.0, -0.25 * kPi);
  static const cplx plus_quarter = std::polar(1.0, 0.25 * kPi);
  const double root = std::sqrt(2.0 * p.G);
  return {minus_quarter * root * x.a2, plus_quarter * root * x.a2p};
}

}  // namespace squeezelab
