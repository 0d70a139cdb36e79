#pragma once

#include "squeezelab/params.hpp"

namespace squeezelab {

/// Deterministic part of the positive-P equations of motion:
///   d a1  = -gamma1 a1  + g a2
///   d a1p = -gamma1 a1p + g a2p
///   d a2  = -gamma2 a2  + E  - 2iG a2p a2^2  - g a1
///   d a2p = -gamma2 a2p + E* + 2iG a2 a2p^2  - g a1p
/// The a2p line carries the conjugate-consistent sign, so conjugate inputs
/// map to conjugate outputs.
PhaseSpacePoint drift_nonlinear(const ModelParams& p, const PhaseSpacePoint& x);

/// Diagonal noise coefficients of the exciton amplitudes. b2^2 = -2iG a2^2
/// and b2p^2 = +2iG a2p^2 hold identically, with no branch cut.
struct NoiseAmplitudes {
  cplx b2;
  cplx b2p;
};

NoiseAmplitudes noise_amplitudes(const ModelParams& p, const PhaseSpacePoint& x);

}  // namespace squeezelab
