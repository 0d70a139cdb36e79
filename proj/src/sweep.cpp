#include "squeezelab/sweep.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <functional>
#include <optional>
#include <tuple>
#include <cmath>
#include <map>
#include <sstream>

#include "squeezelab/config.hpp"
#include "squeezelab/io.hpp"
#include "squeezelab/parallel.hpp"

namespace squeezelab {

namespace {

const std::set<std::string> kAxisNames = {"G", "g", "gamma1", "gamma2", "E"};

[[noreturn]] void bad_spec(const std::string& msg) {
  throw Error(ErrorKind::invalid_config, "sweep spec: " + msg);
}

void set_param(ModelParams& p, const std::string& name, double v) {
  if (name == "G") p.G = v;
  else if (name == "g") p.g = v;
  else if (name == "gamma1") p.gamma1 = v;
  else if (name == "gamma2") p.gamma2 = v;
  else if (name == "E") p.E_mag = v;
  else if (name == "E_phase") p.E_phase = v;
  else bad_spec("unknown parameter '" + name + "'");
}

}  // namespace

std::vector<double> SweepAxis::values() const {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
    out[i] = log ? std::exp(std::log(min) + t * (std::log(max) - std::log(min)))
                 : min + t * (max - min);
  }
  // Pin the end points exactly.
  out.front() = min;
  out.back() = max;
  return out;
}

std::size_t SweepSpec::total_points() const {
  std::size_t n = 1;
  for (const auto& a : axes) {
    if (a.count != 0 && n > budget / a.count + 1) return budget + 1;
    n *= a.count;
  }
  return n;
}

void SweepSpec::validate() const {
  if (axes.empty() || axes.size() > 3) bad_spec("between 1 and 3 axes required");
  std::set<std::string> seen;
  for (const auto& a : axes) {
    if (!kAxisNames.count(a.name)) bad_spec("unknown axis '" + a.name + "'");
    if (!seen.insert(a.name).second) bad_spec("axis '" + a.name + "' repeated");
    if (a.count < 2) bad_spec("axis '" + a.name + "' needs count >= 2");
    if (!std::isfinite(a.min) || !std::isfinite(a.max) || !(a.max > a.min)) {
      bad_spec("axis '" + a.name + "' needs finite min < max");
    }
    if (a.log && !(a.min > 0.0)) bad_spec("log axis '" + a.name + "' needs min > 0");
  }
  for (const auto& o : outputs) {
    if (std::find(kSweepOutputs.begin(), kSweepOutputs.end(), o) == kSweepOutputs.end()) {
      bad_spec("unknown output '" + o + "'");
    }
  }
  if (total_points() > budget) {
    std::ostringstream os;
    os << "sweep grid exceeds the budget of " << budget << " points";
    throw Error(ErrorKind::budget_exceeded, os.str());
  }
}

ModelParams SweepSpec::params_at(const std::vector<double>& coords) const {
  ModelParams p = fixed;
  for (std::size_t k = 0; k < axes.size(); ++k) set_param(p, axes[k].name, coords[k]);
  return p;
}

SweepSpec parse_sweep_spec(const std::string& text, const ModelParams& base) {
  const TomlDocument doc = parse_toml(text);
  SweepSpec spec;
  spec.fixed = base;
  for (const auto& [k, v] : doc.root.entries) {
    if (k == "budget") {
      spec.budget = static_cast<std::size_t>(toml_unsigned(v, k));
    } else if (k == "threads") {
      spec.threads = static_cast<std::size_t>(toml_unsigned(v, k));
    } else if (k == "outputs") {
      if (v.kind != TomlValue::Kind::array) bad_spec("'outputs' must be an array of strings");
      spec.outputs.clear();
      for (const auto& item : v.items) spec.outputs.insert(toml_string(item, "outputs"));
    } else {
      bad_spec("unknown key '" + k + "'");
    }
  }
  for (const auto& [name, table] : doc.tables) {
    if (name != "fixed") bad_spec("unknown table [" + name + "]");
    for (const auto& [k, v] : table.entries) {
      if (k == "omega_c") spec.fixed.omega_c = toml_number(v, k);
      else if (k == "omega_b") spec.fixed.omega_b = toml_number(v, k);
      else set_param(spec.fixed, k, toml_number(v, k));
    }
  }
  for (const auto& [name, tables] : doc.table_arrays) {
    if (name != "axis") bad_spec("unknown table array [[" + name + "]]");
    for (const auto& table : tables) {
      SweepAxis axis;
      bool has_name = false, has_min = false, has_max = false, has_count = false;
      for (const auto& [k, v] : table.entries) {
        if (k == "name") { axis.name = toml_string(v, k); has_name = true; }
        else if (k == "min") { axis.min = toml_number(v, k); has_min = true; }
        else if (k == "max") { axis.max = toml_number(v, k); has_max = true; }
        else if (k == "count") { axis.count = static_cast<std::size_t>(toml_unsigned(v, k)); has_count = true; }
        else if (k == "spacing") {
          const std::string s = toml_string(v, k);
          if (s != "linear" && s != "log") bad_spec("spacing must be linear or log");
          axis.log = s == "log";
        } else {
          bad_spec("unknown axis key '" + k + "'");
        }
      }
      if (!(has_name && has_min && has_max && has_count)) {
        bad_spec("each [[axis]] needs name, min, max and count");
      }
      spec.axes.push_back(axis);
    }
  }
  return spec;
}

PointRecord classify_point(const ModelParams& p) {
  PointRecord r;
  try {
    p.validate();
    const SteadyState ss = solve_steady_state(p);
    r.n2 = ss.n2;
    const StabilityReport rep = stability(p, ss);
    r.min_real_part = rep.min_real_part;
    r.stable = rep.stable;
    r.predicted = squeezing_conditions(p, ss.n2);
    if (!rep.stable) {
      r.status = "unstable-system";
      return r;
    }
    const LinearizedSystem lin = linearize(p, ss);
    const CavitySpectrum spec = spectrum_matrix(lin, FrequencyGrid::from_values({0.0}));
    if (!spec.point_status.front().empty()) {
      r.status = "singular-matrix: " + spec.point_status.front();
      return r;
    }
    const QuadratureSpectrum q = output_quadrature_spectra(spec, default_theta(ss), p.gamma1);
    r.S_plus_0 = q.S_plus.front();
    r.S_minus_0 = q.S_minus.front();
    r.squeezed_plus = r.S_plus_0 < 0.0;
    r.squeezed_minus = r.S_minus_0 < 0.0;
    r.ok = true;
  } catch (const Error& e) {
    r.status = std::string(to_string(e.kind())) + ": " + e.what();
  } catch (const std::exception& e) {
    r.status = std::string("error: ") + e.what();
  }
  return r;
}

namespace {

std::vector<std::size_t> unravel(std::size_t idx, const std::vector<SweepAxis>& axes) {
  std::vector<std::size_t> out(axes.size());
  for (std::size_t k = axes.size(); k-- > 0;) {
    out[k] = idx % axes[k].count;
    idx /= axes[k].count;
  }
  return out;
}

int sign_of(double v) { return v < 0.0 ? -1 : (v > 0.0 ? 1 : 0); }

bool opposite(int a, int b) { return a * b < 0; }

// Marching squares over a 2-D slice. value(i, j) gives the sign at grid
// node (i, j); coords(i, j, dir) the crossing point of the edge starting at
// (i, j) along axis dir.
struct EdgeKey {
  int dir;
  std::size_t i, j;
  bool operator<(const EdgeKey& o) const {
    return std::tie(dir, i, j) < std::tie(o.dir, o.i, o.j);
  }
  bool operator==(const EdgeKey& o) const { return dir == o.dir && i == o.i && j == o.j; }
};

std::vector<std::vector<EdgeKey>> march(std::size_t na, std::size_t nb,
                                        const std::function<int(std::size_t, std::size_t)>& s) {
  std::vector<std::array<EdgeKey, 2>> segments;
  for (std::size_t i = 0; i + 1 < na; ++i) {
    for (std::size_t j = 0; j + 1 < nb; ++j) {
      const int c0 = s(i, j), c1 = s(i + 1, j), c2 = s(i + 1, j + 1), c3 = s(i, j + 1);
      std::vector<EdgeKey> hits;
      if (opposite(c0, c1)) hits.push_back({0, i, j});
      if (opposite(c1, c2)) hits.push_back({1, i + 1, j});
      if (opposite(c3, c2)) hits.push_back({0, i, j + 1});
      if (opposite(c0, c3)) hits.push_back({1, i, j});
      for (std::size_t k = 0; k + 1 < hits.size(); k += 2) segments.push_back({hits[k], hits[k + 1]});
    }
  }

  std::map<EdgeKey, std::vector<std::size_t>> touching;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    touching[segments[k][0]].push_back(k);
    touching[segments[k][1]].push_back(k);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<std::vector<EdgeKey>> chains;

  auto walk = [&](std::size_t start, const EdgeKey& from) {
    std::vector<EdgeKey> chain{from};
    std::size_t seg = start;
    EdgeKey at = from;
    for (;;) {
      used[seg] = true;
      const EdgeKey next = segments[seg][0] == at ? segments[seg][1] : segments[seg][0];
      chain.push_back(next);
      at = next;
      std::optional<std::size_t> cont;
      for (std::size_t t : touching[at]) {
        if (!used[t]) {
          cont = t;
          break;
        }
      }
      if (!cont) break;
      seg = *cont;
    }
    chains.push_back(std::move(chain));
  };

  // Open chains start at an edge touched by a single segment.
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (used[k]) continue;
    for (int end = 0; end < 2; ++end) {
      if (!used[k] && touching[segments[k][end]].size() == 1) walk(k, segments[k][end]);
    }
  }
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (!used[k]) walk(k, segments[k][0]);
  }
  return chains;
}

}  // namespace

std::vector<Polyline> extract_boundaries(const std::vector<SweepAxis>& axes,
                                         const std::vector<int>& sign) {
  std::vector<std::vector<double>> vals;
  for (const auto& a : axes) vals.push_back(a.values());
  std::vector<Polyline> out;

  if (axes.size() == 1) {
    for (std::size_t i = 0; i + 1 < sign.size(); ++i) {
      if (opposite(sign[i], sign[i + 1])) {
        out.push_back({{{0.5 * (vals[0][i] + vals[0][i + 1])}}});
      }
    }
    return out;
  }

  // 2-D directly; 3-D slice by slice along the first axis.
  const std::size_t slices = axes.size() == 3 ? axes[0].count : 1;
  const std::size_t off = axes.size() == 3 ? 1 : 0;
  const std::size_t na = axes[off].count, nb = axes[off + 1].count;
  const auto& va = vals[off];
  const auto& vb = vals[off + 1];
  for (std::size_t k = 0; k < slices; ++k) {
    auto s = [&](std::size_t i, std::size_t j) { return sign[(k * na + i) * nb + j]; };
    for (const auto& chain : march(na, nb, s)) {
      Polyline line;
      for (const auto& e : chain) {
        std::vector<double> pt;
        if (off) pt.push_back(vals[0][k]);
        if (e.dir == 0) {
          pt.push_back(0.5 * (va[e.i] + va[e.i + 1]));
          pt.push_back(vb[e.j]);
        } else {
          pt.push_back(va[e.i]);
          pt.push_back(0.5 * (vb[e.j] + vb[e.j + 1]));
        }
        line.points.push_back(std::move(pt));
      }
      out.push_back(std::move(line));
    }
  }
  return out;
}

RegionMap run_sweep(const SweepSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RegionMap map;
  map.axes = spec.axes;
  const std::size_t n = spec.total_points();
  map.points.resize(n);
  std::vector<std::vector<double>> vals;
  for (const auto& a : spec.axes) vals.push_back(a.values());

  parallel_for(n, resolve_threads(spec.threads), [&](std::size_t idx) {
    const auto ijk = unravel(idx, spec.axes);
    std::vector<double> coords(ijk.size());
    for (std::size_t k = 0; k < ijk.size(); ++k) coords[k] = vals[k][ijk[k]];
    PointRecord r = classify_point(spec.params_at(coords));
    r.coords = std::move(coords);
    map.points[idx] = std::move(r);
  });

  for (const auto& r : map.points) {
    if (r.status != "ok") ++map.failures;
  }

  auto field = [&](auto fn) {
    std::vector<int> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = fn(map.points[i]);
    return extract_boundaries(spec.axes, s);
  };
  auto predicate_sign = [](bool usable, bool squeezed) { return usable ? (squeezed ? -1 : 1) : 0; };
  map.boundaries.emplace_back("S_plus_0", field([](const PointRecord& r) {
                                return r.ok ? sign_of(r.S_plus_0) : 0;
                              }));
  map.boundaries.emplace_back("S_minus_0", field([](const PointRecord& r) {
                                return r.ok ? sign_of(r.S_minus_0) : 0;
                              }));
  map.boundaries.emplace_back("min_real_part", field([](const PointRecord& r) {
                                return r.status.rfind("invalid", 0) == 0 ? 0 : sign_of(r.min_real_part);
                              }));
  map.boundaries.emplace_back("predicted_plus", field([&](const PointRecord& r) {
                                return predicate_sign(r.ok && !r.predicted.degenerate, r.predicted.plus);
                              }));
  map.boundaries.emplace_back("predicted_minus", field([&](const PointRecord& r) {
                                return predicate_sign(r.ok && !r.predicted.degenerate, r.predicted.minus);
                              }));
  map.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return map;
}

std::string RegionMap::points_csv(const SweepSpec& spec) const {
  CsvWriter csv;
  std::vector<std::string> cols;
  for (const auto& a : axes) cols.push_back(a.name);
  for (const auto& o : kSweepOutputs) cols.push_back(o);
  cols.insert(cols.end(), {"status", "predicted_plus", "predicted_minus"});
  csv.header(cols);
  auto want = [&](const char* name) { return spec.outputs.count(name) > 0; };
  for (const auto& r : points) {
    for (double c : r.coords) csv.cell(c);
    const bool solved = r.status == "ok" || r.status == "unstable-system";
    if (want("n2") && solved) csv.cell(r.n2); else csv.empty();
    if (want("min_real_part") && solved) csv.cell(r.min_real_part); else csv.empty();
    if (want("stable") && solved) csv.cell(r.stable); else csv.empty();
    if (want("S_plus_0") && r.ok) csv.cell(r.S_plus_0); else csv.empty();
    if (want("S_minus_0") && r.ok) csv.cell(r.S_minus_0); else csv.empty();
    if (want("squeezed_plus") && r.ok) csv.cell(r.squeezed_plus); else csv.empty();
    if (want("squeezed_minus") && r.ok) csv.cell(r.squeezed_minus); else csv.empty();
    csv.cell(r.status);
    if (solved) csv.cell(r.predicted.plus).cell(r.predicted.minus);
    else csv.empty().empty();
    csv.end_row();
  }
  return csv.str();
}

nlohmann::json RegionMap::boundaries_json() const {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json names = nlohmann::json::array();
  for (const auto& a : axes) names.push_back(a.name);
  j["axes"] = names;
  nlohmann::json b = nlohmann::json::object();
  for (const auto& [name, lines] : boundaries) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& l : lines) arr.push_back(l.points);
    b[name] = arr;
  }
  j["boundaries"] = b;
  return j;
}

nlohmann::json RegionMap::reconciliation_json() const {
  nlohmann::json items = nlohmann::json::array();
  std::size_t compared = 0;
  for (const auto& r : points) {
    if (!r.ok || r.predicted.degenerate) continue;
    ++compared;
    if (r.predicted.plus == r.squeezed_plus && r.predicted.minus == r.squeezed_minus) continue;
    nlohmann::json e;
    e["coords"] = r.coords;
    e["S_plus_0"] = r.S_plus_0;
    e["S_minus_0"] = r.S_minus_0;
    e["predicted_plus"] = r.predicted.plus;
    e["predicted_minus"] = r.predicted.minus;
    e["squeezed_plus"] = r.squeezed_plus;
    e["squeezed_minus"] = r.squeezed_minus;
    items.push_back(e);
  }
  nlohmann::json j;
  j["compared_points"] = compared;
  j["disagreements"] = items.size();
  j["note"] =
      "published zero-frequency inequalities versus the sign of the canonical "
      "zero-frequency quadrature spectra";
  j["points"] = items;
  return j;
}

void write_region_map(const RegionMap& map, const SweepSpec& spec, const std::string& spec_text,
                      const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io_failure, "cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "spec.toml", spec_text);
  write_text_file(dir / "points.csv", map.points_csv(spec));
  write_text_file(dir / "boundaries.json", map.boundaries_json().dump(2) + "\n");
  write_text_file(dir / "reconciliation.json", map.reconciliation_json().dump(2) + "\n");
  nlohmann::json meta;
  meta["tool"] = "squeezelab";
  meta["version"] = kToolVersion;
  meta["points"] = map.points.size();
  meta["failures"] = map.failures;
  meta["elapsed_seconds"] = map.elapsed_seconds;
  meta["tolerances"] = {{"steady_state_residual", "1e-10 * max(1, |E|)"},
                        {"stability_margin", "1e-12 * max rate"},
                        {"eigen_crosscheck", 1e-8}};
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

}  // namespace squeezelab
