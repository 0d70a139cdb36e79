#include "squeezelab/params.hpp"

#include <cmath>
#include <sstream>

namespace squeezelab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameters: return "invalid-parameters";
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::inconsistent_steady_state: return "inconsistent-steady-state";
    case ErrorKind::eigensolver_failure: return "eigensolver-failure";
    case ErrorKind::singular_matrix: return "singular-matrix";
    case ErrorKind::nonreal_spectrum: return "nonreal-spectrum";
    case ErrorKind::unstable_system: return "unstable-system";
    case ErrorKind::all_trajectories_diverged: return "all-trajectories-diverged";
    case ErrorKind::step_too_large: return "step-too-large";
    case ErrorKind::insufficient_samples: return "insufficient-samples";
    case ErrorKind::budget_exceeded: return "budget-exceeded";
    case ErrorKind::io_failure: return "io-failure";
  }
  return "unknown";
}

namespace {

[[noreturn]] void reject(const char* key, const char* rule, double value) {
  std::ostringstream os;
  os.precision(17);
  os << "invalid parameter '" << key << "': " << rule << " (got " << value << ")";
  throw Error(ErrorKind::invalid_parameters, os.str());
}

void require_positive(const char* key, double v) {
  if (!std::isfinite(v) || !(v > 0.0)) reject(key, "must be finite and > 0", v);
}

void require_nonnegative(const char* key, double v) {
  if (!std::isfinite(v) || v < 0.0) reject(key, "must be finite and >= 0", v);
}

}  // namespace

void ModelParams::validate() const {
  require_positive("g", g);
  require_nonnegative("G", G);
  require_nonnegative("E", E_mag);
  if (!std::isfinite(E_phase) || E_phase < 0.0 || E_phase >= 2.0 * kPi) {
    reject("E_phase", "must lie in [0, 2pi)", E_phase);
  }
  require_positive("gamma1", gamma1);
  require_positive("gamma2", gamma2);
  if (omega_c) require_nonnegative("omega_c", *omega_c);
  if (omega_b) require_nonnegative("omega_b", *omega_b);
  if (omega_c && omega_b && *omega_c != *omega_b) {
    std::ostringstream os;
    os.precision(17);
    os << "invalid parameter 'omega_b': detuned drive is not supported, omega_c = "
       << *omega_c << " but omega_b = " << *omega_b;
    throw Error(ErrorKind::invalid_parameters, os.str());
  }
}

}  // namespace squeezelab
