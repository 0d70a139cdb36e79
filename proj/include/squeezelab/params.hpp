#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace squeezelab {

using cplx = std::complex<double>;
using Matrix4c = Eigen::Matrix<cplx, 4, 4>;
using Vector4c = Eigen::Matrix<cplx, 4, 1>;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorKind {
  invalid_parameters,
  invalid_config,
  inconsistent_steady_state,
  eigensolver_failure,
  singular_matrix,
  nonreal_spectrum,
  unstable_system,
  all_trajectories_diverged,
  step_too_large,
  insufficient_samples,
  budget_exceeded,
  io_failure,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Rates and drive of the driven cavity-exciton system, all in one common
/// inverse-time unit. Dynamics live in the frame rotating at the pump
/// frequency, so omega_c / omega_b are metadata and must coincide.
struct ModelParams {
  double g = 1.0;       // exciton-photon coupling
  double G = 0.0;       // exciton-exciton interaction
  double E_mag = 0.0;   // drive amplitude |E|
  double E_phase = 0.0; // arg E, in [0, 2pi)
  double gamma1 = 1.0;  // cavity loss
  double gamma2 = 1.0;  // exciton loss
  std::optional<double> omega_c;
  std::optional<double> omega_b;

  cplx drive() const { return std::polar(E_mag, E_phase); }

  /// Effective damping of the exciton amplitude once the cavity is
  /// adiabatically slaved: gamma2 + g^2 / gamma1.
  double effective_damping() const { return gamma2 + g * g / gamma1; }

  /// Throws Error{invalid_parameters} naming the first offending key.
  void validate() const;
};

/// Point of the doubled positive-P phase space. The "p" members are the
/// independent partners of a1 / a2; they are conjugates only on the
/// classical manifold.
struct PhaseSpacePoint {
  cplx a1{}, a1p{}, a2{}, a2p{};

  Vector4c to_vector() const {
    Vector4c v;
    v << a1, a1p, a2, a2p;
    return v;
  }
  static PhaseSpacePoint from_vector(const Vector4c& v) {
    return {v(0), v(1), v(2), v(3)};
  }
};

// Fixed index convention for 4-vectors and 4x4 matrices.
inline constexpr int kA1 = 0;
inline constexpr int kA1p = 1;
inline constexpr int kA2 = 2;
inline constexpr int kA2p = 3;

}  // namespace squeezelab
