#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "squeezelab/linear_spectra.hpp"

namespace squeezelab {

struct SweepAxis {
  std::string name;  // one of G, g, gamma1, gamma2, E
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 2;
  bool log = false;

  std::vector<double> values() const;
};

/// Quantities a point record may carry.
inline const std::vector<std::string> kSweepOutputs = {
    "n2", "min_real_part", "stable", "S_plus_0", "S_minus_0", "squeezed_plus", "squeezed_minus"};

struct SweepSpec {
  std::vector<SweepAxis> axes;  // first axis varies slowest
  ModelParams fixed;
  std::set<std::string> outputs{kSweepOutputs.begin(), kSweepOutputs.end()};
  std::size_t budget = 1'000'000;
  std::size_t threads = 0;

  std::size_t total_points() const;
  /// Throws Error{invalid_config}, or Error{budget_exceeded} when the grid
  /// is larger than `budget`.
  void validate() const;
  ModelParams params_at(const std::vector<double>& coords) const;
};

/// Reads a sweep spec: top-level `budget`, `outputs`, `threads`; a [fixed]
/// table of model parameters; one [[axis]] table per axis.
SweepSpec parse_sweep_spec(const std::string& text, const ModelParams& base = {});

struct PointRecord {
  std::vector<double> coords;
  bool ok = false;
  std::string status = "ok";  // error kind and message when !ok
  double n2 = 0.0;
  double min_real_part = 0.0;
  bool stable = false;
  double S_plus_0 = 0.0;
  double S_minus_0 = 0.0;
  bool squeezed_plus = false;
  bool squeezed_minus = false;
  SqueezingPrediction predicted;  // published inequalities
};

/// Steady state, stability, canonical zero-frequency quadrature spectra at
/// the default reference phase, and the published predicates. Errors are
/// captured in the record.
PointRecord classify_point(const ModelParams& p);

struct Polyline {
  std::vector<std::vector<double>> points;
};

struct RegionMap {
  std::vector<SweepAxis> axes;
  std::vector<PointRecord> points;  // row-major, last axis fastest
  // Keyed by quantity: S_plus_0, S_minus_0, min_real_part, predicted_plus,
  // predicted_minus.
  std::vector<std::pair<std::string, std::vector<Polyline>>> boundaries;
  std::size_t failures = 0;
  double elapsed_seconds = 0.0;

  std::string points_csv(const SweepSpec& spec) const;
  nlohmann::json boundaries_json() const;
  /// Points where a published predicate disagrees with the canonical sign.
  nlohmann::json reconciliation_json() const;
};

RegionMap run_sweep(const SweepSpec& spec);

/// Sign-change boundaries of one scalar field over the grid (1-3 axes).
/// `sign` is -1, 0 or +1 per point; 0 marks points without a usable sign
/// and never bounds a region.
std::vector<Polyline> extract_boundaries(const std::vector<SweepAxis>& axes,
                                         const std::vector<int>& sign);

/// Writes spec.toml, points.csv, boundaries.json, meta.json and
/// reconciliation.json into `dir`.
void write_region_map(const RegionMap& map, const SweepSpec& spec, const std::string& spec_text,
                      const std::filesystem::path& dir);

}  // namespace squeezelab
