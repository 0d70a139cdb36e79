#include "squeezelab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "squeezelab/config.hpp"
#include "squeezelab/dynamics.hpp"
#include "squeezelab/io.hpp"
#include "squeezelab/reconcile.hpp"
#include "squeezelab/sde.hpp"
#include "squeezelab/sweep.hpp"

namespace squeezelab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

json to_json(const Matrix4c& m) {
  json rows = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int j = 0; j < 4; ++j) row.push_back(to_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const PhaseSpacePoint& x) {
  return {{"a1", to_json(x.a1)}, {"a1p", to_json(x.a1p)}, {"a2", to_json(x.a2)},
          {"a2p", to_json(x.a2p)}};
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameters:
    case ErrorKind::invalid_config:
    case ErrorKind::budget_exceeded:
    case ErrorKind::io_failure:
      return kExitConfig;
    case ErrorKind::unstable_system:
      return kExitUnstable;
    case ErrorKind::all_trajectories_diverged:
    case ErrorKind::step_too_large:
    case ErrorKind::insufficient_samples:
      return kExitSimulation;
    default:
      return kExitValidation;
  }
}

struct Options {
  std::string config;
  std::string out;
  std::string format;
  std::string dump_config;
  std::uint64_t seed = 0;
  double g = 0, G = 0, E = 0, E_phase = 0, gamma1 = 0, gamma2 = 0;
  double omega_max = 0, theta = 0;
  std::size_t omega_points = 0;

  CLI::Option *o_out = nullptr, *o_format = nullptr, *o_seed = nullptr;
  CLI::Option *o_g = nullptr, *o_G = nullptr, *o_E = nullptr, *o_E_phase = nullptr;
  CLI::Option *o_gamma1 = nullptr, *o_gamma2 = nullptr;
  CLI::Option *o_omega_max = nullptr, *o_omega_points = nullptr, *o_theta = nullptr;

  // spectrum
  bool as_printed = false;
  // simulate
  bool linearized = false;
  std::string dump_trajectories;
  std::size_t n_traj = 0;
  double dt = 0, t_record = 0, t_transient = 0, sim_omega_max = 0;
  std::size_t sim_omega_points = 0, spectral_segments = 0;
  std::string scheme;
  CLI::Option *o_n_traj = nullptr, *o_dt = nullptr, *o_t_record = nullptr,
              *o_t_transient = nullptr, *o_scheme = nullptr, *o_sim_omega_max = nullptr,
              *o_sim_omega_points = nullptr, *o_spectral_segments = nullptr;
  // validate
  bool corrupt_drift = false;
  std::size_t sde_traj = 400;
  // sweep
  std::string spec_path;
};

RunConfig load_config(const Options& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    std::string text;
    try {
      text = read_text_file(o.config);
    } catch (const Error& e) {
      throw Error(ErrorKind::invalid_config, e.what());
    }
    cfg = parse_run_config(text);
  }
  if (o.o_g->count()) cfg.params.g = o.g;
  if (o.o_G->count()) cfg.params.G = o.G;
  if (o.o_E->count()) cfg.params.E_mag = o.E;
  if (o.o_E_phase->count()) cfg.params.E_phase = o.E_phase;
  if (o.o_gamma1->count()) cfg.params.gamma1 = o.gamma1;
  if (o.o_gamma2->count()) cfg.params.gamma2 = o.gamma2;
  if (o.o_omega_max->count()) cfg.omega_max = o.omega_max;
  if (o.o_omega_points->count()) cfg.omega_points = o.omega_points;
  if (o.o_theta->count()) cfg.theta = o.theta;
  if (o.o_out->count()) cfg.out_dir = o.out;
  if (o.o_format->count()) cfg.format = o.format;
  if (o.o_seed->count()) cfg.sim.seed = o.seed;
  if (o.as_printed) cfg.as_printed = true;
  if (o.linearized) cfg.linearized = true;
  if (!o.dump_trajectories.empty()) cfg.sim.dump_path = o.dump_trajectories;
  if (o.o_n_traj && o.o_n_traj->count()) cfg.sim.n_traj = o.n_traj;
  if (o.o_dt && o.o_dt->count()) cfg.sim.dt = o.dt;
  if (o.o_t_record && o.o_t_record->count()) cfg.sim.t_record = o.t_record;
  if (o.o_t_transient && o.o_t_transient->count()) cfg.sim.t_transient = o.t_transient;
  if (o.o_scheme && o.o_scheme->count()) cfg.sim.scheme = parse_scheme(o.scheme);
  if (o.o_sim_omega_max && o.o_sim_omega_max->count()) cfg.sim_omega_max = o.sim_omega_max;
  if (o.o_sim_omega_points && o.o_sim_omega_points->count()) cfg.sim_omega_points = o.sim_omega_points;
  if (o.o_spectral_segments && o.o_spectral_segments->count()) {
    cfg.sim.spectral_segments = o.spectral_segments;
  }
  if (cfg.format != "csv" && cfg.format != "json") {
    throw Error(ErrorKind::invalid_config, "format must be csv or json");
  }
  cfg.params.validate();
  return cfg;
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io_failure, "cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

// key,value table or flat JSON object, depending on the format.
class Report {
 public:
  void add(const std::string& key, double v) {
    rows_.emplace_back(key, format_double(v));
    obj_[key] = v;
  }
  void add(const std::string& key, bool v) {
    rows_.emplace_back(key, v ? "true" : "false");
    obj_[key] = v;
  }
  void add(const std::string& key, const std::string& v) {
    rows_.emplace_back(key, v);
    obj_[key] = v;
  }
  void add(const std::string& key, cplx z) {
    add(key + "_re", z.real());
    add(key + "_im", z.imag());
  }
  std::string render(const std::string& format) const {
    if (format == "json") return obj_.dump(2) + "\n";
    CsvWriter csv;
    csv.header({"quantity", "value"});
    for (const auto& [k, v] : rows_) csv.cell(k).cell(v).end_row();
    return csv.str();
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
  json obj_ = json::object();
};

void emit(const Report& r, const RunConfig& cfg, bool write_file, const std::string& stem,
          std::ostream& out) {
  const std::string text = r.render(cfg.format);
  out << text;
  if (write_file) write_text_file(ensure_dir(cfg.out_dir) / (stem + "." + cfg.format), text);
}

Report stability_report(const StabilityReport& rep) {
  Report r;
  r.add("stable", rep.stable);
  r.add("min_real_part", rep.min_real_part);
  r.add("margin", rep.margin);
  r.add("crosscheck_deviation", rep.crosscheck_deviation);
  r.add("crosscheck_ok", rep.crosscheck_ok);
  for (int k = 0; k < 4; ++k) {
    r.add("lambda" + std::to_string(k) + "_closed", rep.eigenvalues_closed[k]);
  }
  for (int k = 0; k < 4; ++k) {
    r.add("lambda" + std::to_string(k) + "_numeric", rep.eigenvalues_numeric[k]);
  }
  if (!rep.diagnostic.empty()) r.add("diagnostic", rep.diagnostic);
  return r;
}

int cmd_steady(const RunConfig& cfg, bool write_file, std::ostream& out) {
  const SteadyState ss = solve_steady_state(cfg.params);
  Report r;
  r.add("n2", ss.n2);
  r.add("a1", ss.a1_0);
  r.add("a1p", ss.a1p_0);
  r.add("a2", ss.a2_0);
  r.add("a2p", ss.a2p_0);
  r.add("theta1", ss.theta1);
  r.add("theta2", ss.theta2);
  r.add("residual", ss.residual);
  emit(r, cfg, write_file, "steady", out);
  return kExitOk;
}

int cmd_stability(const RunConfig& cfg, bool write_file, std::ostream& out) {
  const SteadyState ss = solve_steady_state(cfg.params);
  const StabilityReport rep = stability(cfg.params, ss);
  emit(stability_report(rep), cfg, write_file, "stability", out);
  return rep.stable ? kExitOk : kExitUnstable;
}

FrequencyGrid grid_for(const RunConfig& cfg, const SteadyState& ss) {
  const double wmax = cfg.omega_max ? *cfg.omega_max : 20.0 * max_rate(cfg.params, ss.n2);
  return FrequencyGrid::symmetric_grid(wmax, cfg.omega_points);
}

// Fails with the stability report on stderr when the point is unstable.
std::optional<StabilityReport> require_stable(const RunConfig& cfg, const SteadyState& ss,
                                              std::ostream& err) {
  const StabilityReport rep = stability(cfg.params, ss);
  if (rep.stable) return rep;
  err << "unstable-system: the linearized drift has an eigenvalue with Re <= margin\n";
  err << stability_report(rep).render("json");
  return std::nullopt;
}

int cmd_spectrum(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ModelParams& p = cfg.params;
  const SteadyState ss = solve_steady_state(p);
  if (!require_stable(cfg, ss, err)) return kExitUnstable;
  const LinearizedSystem lin = linearize(p, ss);
  const FrequencyGrid grid = grid_for(cfg, ss);
  const CavitySpectrum spec = spectrum_matrix(lin, grid);
  const double theta = cfg.theta ? *cfg.theta : default_theta(ss);
  const QuadratureSpectrum q = output_quadrature_spectra(spec, theta, p.gamma1);

  std::optional<CavitySpectrum> printed_cavity;
  std::optional<QuadratureSpectrum> printed_q, corrected_q;
  if (cfg.as_printed) {
    printed_cavity = closed_form_cavity_spectra(p, ss, grid);
    printed_q = closed_form_output_spectra(p, ss, grid);
    corrected_q = corrected_output_spectra(p, ss, grid);
  }

  const fs::path dir = ensure_dir(cfg.out_dir);
  if (cfg.format == "json") {
    json j;
    j["theta"] = theta;
    j["omega"] = grid.omegas;
    auto cols = [](const std::vector<cplx>& v) {
      json a = json::array();
      for (cplx z : v) a.push_back(to_json(z));
      return a;
    };
    j["S11"] = cols(spec.S11);
    j["S12"] = cols(spec.S12);
    j["S21"] = cols(spec.S21);
    j["S22"] = cols(spec.S22);
    j["S_plus"] = q.S_plus;
    j["S_minus"] = q.S_minus;
    if (cfg.as_printed) {
      j["printed"] = {{"S11", cols(printed_cavity->S11)},     {"S12", cols(printed_cavity->S12)},
                      {"S22", cols(printed_cavity->S22)},     {"Lambda", printed_cavity->Lambda},
                      {"S_plus", printed_q->S_plus},          {"S_minus", printed_q->S_minus},
                      {"S_plus_corrected", corrected_q->S_plus},
                      {"S_minus_corrected", corrected_q->S_minus}};
    }
    write_text_file(dir / "spectrum.json", j.dump(2) + "\n");
  } else {
    CsvWriter csv;
    std::vector<std::string> cols = {"omega",  "S11_re", "S11_im", "S12_re",  "S12_im", "S21_re",
                                     "S21_im", "S22_re", "S22_im", "S_plus", "S_minus"};
    if (cfg.as_printed) {
      cols.insert(cols.end(), {"S11_printed_re", "S11_printed_im", "S12_printed_re",
                               "S12_printed_im", "S22_printed_re", "S22_printed_im",
                               "Lambda_printed", "S_plus_printed", "S_minus_printed",
                               "S_plus_corrected", "S_minus_corrected"});
    }
    csv.header(cols);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      csv.cell(grid.omegas[k]);
      for (const auto* v : {&spec.S11, &spec.S12, &spec.S21, &spec.S22}) {
        csv.cell((*v)[k].real()).cell((*v)[k].imag());
      }
      csv.cell(q.S_plus[k]).cell(q.S_minus[k]);
      if (cfg.as_printed) {
        for (const auto* v : {&printed_cavity->S11, &printed_cavity->S12, &printed_cavity->S22}) {
          csv.cell((*v)[k].real()).cell((*v)[k].imag());
        }
        csv.cell(printed_cavity->Lambda[k]);
        csv.cell(printed_q->S_plus[k]).cell(printed_q->S_minus[k]);
        csv.cell(corrected_q->S_plus[k]).cell(corrected_q->S_minus[k]);
      }
      csv.end_row();
    }
    write_text_file(dir / "spectrum.csv", csv.str());
  }

  out << "spectrum: " << grid.size() << " frequencies, theta = " << format_double(theta);
  if (q.S_plus_0) {
    out << ", S_plus(0) = " << format_double(*q.S_plus_0)
        << ", S_minus(0) = " << format_double(*q.S_minus_0);
  }
  out << "\n";

  if (cfg.as_printed) {
    const ReconciliationReport rep = reconcile(p, grid);
    json j = rep.to_json();
    j["printed_output_theta"] = default_theta(ss);
    j["canonical_theta"] = theta;
    write_text_file(dir / "deviation.json", j.dump(2) + "\n");
    for (const auto& e : rep.entries) {
      out << "  " << e.id << ": " << (e.printed_consistent ? "consistent" : "deviates")
          << " (printed " << format_double(e.printed_deviation) << ")\n";
    }
  }
  return kExitOk;
}

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool informational = false;
  std::string note;
};

Check check_le(std::string name, double value, double tol, std::string note = {}) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.tolerance = tol;
  c.pass = value <= tol;
  c.note = std::move(note);
  return c;
}

double rel(double diff, double scale) {
  if (diff == 0.0) return 0.0;
  return scale > 0.0 ? diff / scale : std::numeric_limits<double>::infinity();
}

double structural_deviation(const CavitySpectrum& s, const QuadratureSpectrum& q, double gamma1) {
  double worst = 0.0;
  for (std::size_t k = 0; k < s.omegas.size(); ++k) {
    const double scale = std::max({std::abs(s.S11[k]), std::abs(s.S12[k]), std::abs(s.S22[k])});
    worst = std::max(worst, rel(std::abs(s.S22[k] - std::conj(s.S11[k])), scale));
    worst = std::max(worst, rel(std::abs(s.S12[k] - s.S21[k]), scale));
    worst = std::max(worst, rel(std::abs(s.S12[k].imag()), scale));
    const double sum = q.S_plus[k] + q.S_minus[k];
    const double ref = 4.0 * gamma1 * (s.S12[k] + s.S21[k]).real();
    worst = std::max(worst, rel(std::abs(sum - ref), gamma1 * scale));
  }
  return std::max(worst, q.max_imag_residue);
}

std::vector<Check> validation_suite(const RunConfig& cfg, bool corrupt_drift,
                                    std::size_t sde_traj, std::ostream& err) {
  const ModelParams& p = cfg.params;
  std::vector<Check> checks;
  const SteadyState ss = solve_steady_state(p);

  const double root_ref = density_bisection(p);
  checks.push_back(check_le("density_vs_bisection",
                            std::abs(ss.n2 - root_ref) / std::max(1.0, std::abs(root_ref)), 1e-10));
  checks.push_back(check_le("steady_state_residual", ss.residual, steady_state_tolerance(p)));

  const LinearizedSystem lin = linearize(p, ss);
  const DriftFunction drift = corrupt_drift ? DriftFunction(drift_fokker_planck_sign)
                                            : DriftFunction(drift_nonlinear);
  const Matrix4c fd = drift_matrix_fd(drift, p, ss.point());
  const double jac =
      (fd - lin.A).cwiseAbs().maxCoeff() / std::max(1.0, lin.A.cwiseAbs().maxCoeff());
  checks.push_back(check_le("drift_jacobian", jac, 1e-6,
                            corrupt_drift ? "drift sign deliberately corrupted" : ""));

  const StabilityReport rep = stability(p, ss);
  checks.push_back(check_le("eigenvalues_closed_vs_numeric", rep.crosscheck_deviation, 1e-8));
  double char_res = 0.0;
  for (cplx l : rep.eigenvalues_closed) {
    const PolynomialValue v = characteristic_polynomial(p, ss.n2, l);
    char_res = std::max(char_res, rel(std::abs(v.value), v.scale));
  }
  checks.push_back(check_le("characteristic_residual", char_res, 1e-8));
  {
    Check c;
    c.name = "stable";
    c.value = rep.min_real_part;
    c.tolerance = rep.margin;
    c.pass = rep.stable;
    c.note = "min Re lambda must exceed the margin";
    checks.push_back(c);
  }
  if (!rep.stable) return checks;

  const FrequencyGrid grid = grid_for(cfg, ss);
  const CavitySpectrum spec = spectrum_matrix(lin, grid);
  const QuadratureSpectrum q = output_quadrature_spectra(spec, default_theta(ss), p.gamma1);

  if (p.G == 0.0 || ss.n2 == 0.0) {
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      worst = std::max({worst, std::abs(spec.S11[k]), std::abs(spec.S12[k]),
                        std::abs(spec.S21[k]), std::abs(spec.S22[k]), std::abs(q.S_plus[k]),
                        std::abs(q.S_minus[k])});
    }
    checks.push_back(check_le("coherent_limit_spectra", worst, 1e-14,
                              "zero diffusion: every spectrum vanishes"));
    return checks;
  }

  checks.push_back(check_le("structural_invariants", structural_deviation(spec, q, p.gamma1), 1e-10));
  const QuadratureSpectrum corrected = corrected_output_spectra(p, ss, grid);
  checks.push_back(check_le("output_spectra_rederived_vs_matrix",
                            quadrature_deviation(corrected, q), 1e-8));

  const Matrix4c sigma = lyapunov_covariance(lin);
  const double dnorm = lin.D.cwiseAbs().maxCoeff();
  checks.push_back(check_le("lyapunov_residual", lyapunov_residual(lin, sigma), 1e-10 * dnorm));
  const double cutoff = 100.0 * max_rate(p, ss.n2);
  {
    const Matrix4c lit = integrated_spectrum(lin, cutoff, 10000, false);
    const double scale = sigma.block<2, 2>(0, 0).cwiseAbs().maxCoeff();
    checks.push_back(check_le(
        "lyapunov_vs_integral_cavity",
        rel((lit - sigma).block<2, 2>(0, 0).cwiseAbs().maxCoeff(), scale), 1e-3));
    const Matrix4c corr = integrated_spectrum(lin, cutoff, 10000, true);
    checks.push_back(check_le("lyapunov_vs_integral_tail_corrected",
                              rel((corr - sigma).cwiseAbs().maxCoeff(), sigma.cwiseAbs().maxCoeff()),
                              1e-3));
  }

  if (sde_traj > 0) {
    SimConfig sim;
    sim.n_traj = sde_traj;
    sim.seed = cfg.sim.seed;
    sim.scheme = Scheme::semi_implicit_midpoint;
    const double rate = lin.A.cwiseAbs().maxCoeff();
    sim.dt = 0.02 / rate;
    sim.sample_interval = 5.0 * *sim.dt;
    sim.t_record = std::max(200.0 / rate, 60.0 / rep.min_real_part);
    sim.correlation_lags = 0;
    sim.spectral_grid = FrequencyGrid::from_values({0.0});
    sim.threads = cfg.sim.threads;
    const EnsembleStats st = simulate_linearized(lin, ss, sim);
    double z = 0.0;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const cplx d = st.covariance(i, j) - sigma(i, j);
        const cplx se = st.covariance_stderr(i, j);
        const double floor = 1e-12 * sigma.cwiseAbs().maxCoeff();
        z = std::max(z, std::abs(d.real()) / std::max(se.real(), floor));
        z = std::max(z, std::abs(d.imag()) / std::max(se.imag(), floor));
      }
    }
    checks.push_back(check_le("sde_linearized_covariance_zscore", z, 4.0,
                              std::to_string(sde_traj) + " trajectories"));
  }

  try {
    const ReconciliationReport recon = reconcile(p, grid);
    for (const auto& e : recon.entries) {
      Check c;
      c.name = "printed:" + e.id;
      c.value = e.printed_deviation;
      c.tolerance = recon.tolerance;
      c.pass = e.printed_consistent;
      c.informational = true;
      c.note = e.finding;
      checks.push_back(c);
    }
  } catch (const Error& e) {
    err << "reconciliation skipped: " << e.what() << "\n";
  }
  return checks;
}

int cmd_validate(const RunConfig& cfg, bool corrupt_drift, std::size_t sde_traj, bool write_file,
                 std::ostream& out, std::ostream& err) {
  const std::vector<Check> checks = validation_suite(cfg, corrupt_drift, sde_traj, err);
  bool ok = true;
  std::string text;
  if (cfg.format == "json") {
    json arr = json::array();
    for (const auto& c : checks) {
      arr.push_back({{"check", c.name}, {"value", c.value}, {"tolerance", c.tolerance},
                     {"pass", c.pass}, {"informational", c.informational}, {"note", c.note}});
      if (!c.informational && !c.pass) ok = false;
    }
    text = json{{"passed", ok}, {"checks", arr}}.dump(2) + "\n";
  } else {
    CsvWriter csv;
    csv.header({"check", "value", "tolerance", "pass", "kind", "note"});
    for (const auto& c : checks) {
      csv.cell(c.name).cell(c.value).cell(c.tolerance).cell(c.pass);
      csv.cell(c.informational ? "as-printed" : "canonical").cell(c.note).end_row();
      if (!c.informational && !c.pass) ok = false;
    }
    text = csv.str();
  }
  out << text;
  if (write_file) write_text_file(ensure_dir(cfg.out_dir) / ("validate." + cfg.format), text);
  if (!ok) {
    err << "validation failed:";
    for (const auto& c : checks) {
      if (!c.informational && !c.pass) err << " " << c.name;
    }
    err << "\n";
  }
  return ok ? kExitOk : kExitValidation;
}

int cmd_sweep(const RunConfig& cfg, const std::string& spec_path, std::ostream& out) {
  std::string text;
  try {
    text = read_text_file(spec_path);
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_config, e.what());
  }
  SweepSpec spec = parse_sweep_spec(text, cfg.params);
  if (spec.threads == 0) spec.threads = cfg.sim.threads;
  spec.validate();
  out << "sweep: " << spec.total_points() << " points\n";
  const RegionMap map = run_sweep(spec);
  write_region_map(map, spec, text, ensure_dir(cfg.out_dir));
  out << "sweep: done, " << map.failures << " of " << map.points.size()
      << " points carry a failure status; results in " << cfg.out_dir << "\n";
  return kExitOk;
}

SimConfig sim_config_for(const RunConfig& cfg) {
  SimConfig sim = cfg.sim;
  if (cfg.sim_omega_max) {
    sim.spectral_grid = FrequencyGrid::symmetric_grid(*cfg.sim_omega_max, cfg.sim_omega_points);
  }
  return sim;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ModelParams& p = cfg.params;
  const SteadyState ss = solve_steady_state(p);
  const StabilityReport rep = stability(p, ss);
  const SimConfig sim = sim_config_for(cfg);

  std::optional<LinearizedSystem> lin;
  if (rep.stable) lin = linearize(p, ss);
  EnsembleStats st;
  if (cfg.linearized) {
    if (!require_stable(cfg, ss, err)) return kExitUnstable;
    st = simulate_linearized(*lin, ss, sim);
  } else {
    st = simulate_nonlinear(p, sim);
  }

  std::optional<CavitySpectrum> analytic;
  std::optional<Matrix4c> sigma;
  if (lin) {
    analytic = spectrum_matrix(*lin, FrequencyGrid::from_values(st.spectra.omegas));
    sigma = lyapunov_covariance(*lin);
  }

  const SpectralEstimate& s = st.spectra;
  CsvWriter csv;
  std::vector<std::string> cols = {"omega"};
  const char* names[] = {"S11", "S12", "S21", "S22"};
  for (const char* n : names) {
    for (const char* suffix : {"_re", "_im", "_se_re", "_se_im"}) cols.push_back(std::string(n) + suffix);
  }
  for (const char* n : names) {
    for (const char* suffix : {"_analytic_re", "_analytic_im"}) cols.push_back(std::string(n) + suffix);
  }
  csv.header(cols);
  for (std::size_t k = 0; k < s.omegas.size(); ++k) {
    csv.cell(s.omegas[k]);
    const std::vector<cplx>* est[] = {&s.S11, &s.S12, &s.S21, &s.S22};
    const std::vector<cplx>* se[] = {&s.S11_se, &s.S12_se, &s.S21_se, &s.S22_se};
    for (int c = 0; c < 4; ++c) {
      csv.cell((*est[c])[k].real()).cell((*est[c])[k].imag());
      csv.cell((*se[c])[k].real()).cell((*se[c])[k].imag());
    }
    if (analytic) {
      const std::vector<cplx>* an[] = {&analytic->S11, &analytic->S12, &analytic->S21,
                                       &analytic->S22};
      for (int c = 0; c < 4; ++c) csv.cell((*an[c])[k].real()).cell((*an[c])[k].imag());
    } else {
      for (int c = 0; c < 8; ++c) csv.empty();
    }
    csv.end_row();
  }
  const fs::path dir = ensure_dir(cfg.out_dir);
  write_text_file(dir / "sde_spectra.csv", csv.str());

  json j;
  j["model"] = cfg.linearized ? "linearized" : "nonlinear";
  j["scheme"] = to_string(sim.scheme);
  j["seed"] = sim.seed;
  j["n_traj"] = sim.n_traj;
  j["n_kept"] = st.n_kept;
  j["n_discarded"] = st.n_discarded;
  j["discarded_fraction"] = st.discarded_fraction;
  j["max_relative_step"] = st.max_relative_step;
  j["sample_interval"] = st.sample_interval;
  j["samples_per_trajectory"] = st.samples_per_trajectory;
  j["samples_per_segment"] = st.samples_per_segment;
  if (st.correlation_time) j["correlation_time"] = *st.correlation_time;
  j["steady_state"] = to_json(ss.point());
  j["mean_final"] = to_json(st.mean_final);
  j["mean"] = to_json(st.mean);
  j["mean_stderr"] = to_json(st.mean_stderr);
  j["covariance"] = to_json(st.covariance);
  j["covariance_stderr"] = to_json(st.covariance_stderr);
  if (sigma) j["covariance_analytic"] = to_json(*sigma);
  json corr = json::array();
  for (std::size_t k = 0; k < st.lags.size(); ++k) {
    corr.push_back({{"lag", st.lags[k]}, {"corr", to_json(st.corr[k])}});
  }
  j["correlations"] = corr;
  write_text_file(dir / "ensemble.json", j.dump(2) + "\n");

  if (cfg.format == "json") {
    out << json{{"n_kept", st.n_kept}, {"discarded_fraction", st.discarded_fraction},
                {"out", cfg.out_dir}}
               .dump(2)
        << "\n";
  } else {
    out << "simulate: kept " << st.n_kept << " of " << sim.n_traj
        << " trajectories (discarded fraction " << format_double(st.discarded_fraction)
        << "); results in " << cfg.out_dir << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Squeezed-light spectra of a driven cavity-exciton system"};
  app.name("squeezelab");
  app.require_subcommand(1);
  app.fallthrough();
  Options o;

  app.add_option("--config", o.config, "TOML run configuration");
  o.o_out = app.add_option("--out", o.out, "output directory");
  o.o_format = app.add_option("--format", o.format, "csv or json")
                   ->check(CLI::IsMember({"csv", "json"}));
  o.o_seed = app.add_option("--seed", o.seed, "base RNG seed");
  o.o_g = app.add_option("--g", o.g, "exciton-photon coupling");
  o.o_G = app.add_option("--G", o.G, "exciton-exciton interaction");
  o.o_E = app.add_option("--E", o.E, "drive amplitude |E|");
  o.o_E_phase = app.add_option("--E-phase", o.E_phase, "drive phase in [0, 2pi)");
  o.o_gamma1 = app.add_option("--gamma1", o.gamma1, "cavity loss");
  o.o_gamma2 = app.add_option("--gamma2", o.gamma2, "exciton loss");
  o.o_omega_max = app.add_option("--omega-max", o.omega_max, "frequency grid half-width");
  o.o_omega_points = app.add_option("--omega-points", o.omega_points, "odd number of frequencies");
  o.o_theta = app.add_option("--theta", o.theta, "quadrature phase (default theta1 - pi/4)");
  app.add_option("--dump-config", o.dump_config, "write the effective configuration here");

  auto* steady = app.add_subcommand("steady", "stationary solution");
  auto* stab = app.add_subcommand("stability", "eigenvalues of the linearized drift");
  auto* spectrum = app.add_subcommand("spectrum", "cavity and output quadrature spectra");
  spectrum->add_flag("--as-printed", o.as_printed, "add the published expanded forms");
  auto* validate = app.add_subcommand("validate", "cross-pipeline checks");
  validate->add_option("--sde-traj", o.sde_traj, "trajectories for the SDE covariance check");
  validate->add_flag("--test-corrupt-drift", o.corrupt_drift)->group("");
  auto* sweep = app.add_subcommand("sweep", "parameter-space region maps");
  sweep->add_option("--spec", o.spec_path, "sweep spec (TOML)")->required();
  auto* simulate = app.add_subcommand("simulate", "positive-P ensemble");
  simulate->add_flag("--linearized", o.linearized, "integrate the linearized equations");
  simulate->add_option("--dump-trajectories", o.dump_trajectories, "raw trajectory dump file");
  o.o_n_traj = simulate->add_option("--n-traj", o.n_traj, "number of trajectories");
  o.o_dt = simulate->add_option("--dt", o.dt, "time step");
  o.o_t_record = simulate->add_option("--t-record", o.t_record, "recorded time per trajectory");
  o.o_t_transient = simulate->add_option("--t-transient", o.t_transient, "discarded transient");
  o.o_scheme = simulate->add_option("--scheme", o.scheme, "euler_maruyama or semi_implicit_midpoint");
  o.o_sim_omega_max = simulate->add_option("--sim-omega-max", o.sim_omega_max,
                                           "half-width of the estimated spectra");
  o.o_sim_omega_points = simulate->add_option("--sim-omega-points", o.sim_omega_points,
                                              "odd number of estimated frequencies");
  o.o_spectral_segments = simulate->add_option("--spectral-segments", o.spectral_segments,
                                               "Hann segments per trajectory record");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig cfg = load_config(o);
    if (!o.dump_config.empty()) write_text_file(o.dump_config, dump_run_config(cfg));
    const bool write_file = o.o_out->count() > 0;
    if (steady->parsed()) return cmd_steady(cfg, write_file, out);
    if (stab->parsed()) return cmd_stability(cfg, write_file, out);
    if (spectrum->parsed()) return cmd_spectrum(cfg, out, err);
    if (validate->parsed()) {
      return cmd_validate(cfg, o.corrupt_drift, o.sde_traj, write_file, out, err);
    }
    if (sweep->parsed()) return cmd_sweep(cfg, o.spec_path, out);
    if (simulate->parsed()) return cmd_simulate(cfg, out, err);
  } catch (const Error& e) {
    err << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace squeezelab
