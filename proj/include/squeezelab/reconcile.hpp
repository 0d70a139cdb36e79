#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "squeezelab/linear_spectra.hpp"

namespace squeezelab {

using DriftFunction = std::function<PhaseSpacePoint(const ModelParams&, const PhaseSpacePoint&)>;

/// Central-difference Jacobian of a holomorphic drift with respect to the
/// four independent phase-space amplitudes; returns -J so that it compares
/// directly with the drift matrix A.
Matrix4c drift_matrix_fd(const DriftFunction& drift, const ModelParams& p,
                         const PhaseSpacePoint& x, double rel_step = 1e-6);

/// The a2p drift with the nonlinear term carrying the same sign as in the a2
/// line, as in the published Fokker-Planck form. Breaks conjugation symmetry.
PhaseSpacePoint drift_fokker_planck_sign(const ModelParams& p, const PhaseSpacePoint& x);

/// Stationary density by plain bisection on [0, |E|^2 / c^2].
double density_bisection(const ModelParams& p);

/// One published expanded formula checked against the matrix pipeline.
struct ReconciliationEntry {
  std::string id;
  std::string formula;
  std::string finding;
  std::string correction;       // empty when the printed form is consistent
  double printed_deviation = 0.0;    // max relative deviation, printed vs canonical
  double corrected_deviation = 0.0;  // same for the corrected form
  bool printed_consistent = true;
};

struct ReconciliationReport {
  ModelParams params;
  double n2 = 0.0;
  double tolerance = 1e-8;
  std::vector<ReconciliationEntry> entries;

  nlohmann::json to_json() const;
  const ReconciliationEntry* find(const std::string& id) const;
};

/// Evaluates every published expanded formula against the canonical
/// pipeline on `grid` and records the deviations and derived corrections.
ReconciliationReport reconcile(const ModelParams& p, const FrequencyGrid& grid,
                               double tolerance = 1e-8);

/// Max over the grid of |x - ref| / max(|ref| block scale) for the cavity
/// block (S11, S12, S21, S22).
double cavity_block_deviation(const CavitySpectrum& x, const CavitySpectrum& ref);

/// Max over the grid of |x - ref| / max(|ref S+|, |ref S-|) per point.
double quadrature_deviation(const QuadratureSpectrum& x, const QuadratureSpectrum& ref);

}  // namespace squeezelab
