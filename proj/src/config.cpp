#include "squeezelab/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "squeezelab/io.hpp"

namespace squeezelab {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  std::ostringstream os;
  os << "config line " << line << ": " << msg;
  throw Error(ErrorKind::invalid_config, os.str());
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && in_string) {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : s_(text), line_(line) {}

  TomlValue parse() {
    TomlValue v = value();
    skip_ws();
    if (pos_ != s_.size()) fail(line_, "unexpected trailing text '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  TomlValue value() {
    skip_ws();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    TomlValue v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '"') {
      v.kind = TomlValue::Kind::string;
      v.text = string_literal();
    } else if (c == '[') {
      v.kind = TomlValue::Kind::array;
      ++pos_;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      for (;;) {
        v.items.push_back(value());
        skip_ws();
        if (pos_ >= s_.size()) fail(line_, "unterminated array");
        if (s_[pos_] == ',') {
          ++pos_;
          skip_ws();
          if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            break;
          }
          continue;
        }
        if (s_[pos_] == ']') {
          ++pos_;
          break;
        }
        fail(line_, "expected ',' or ']' in array");
      }
    } else {
      std::size_t end = pos_;
      while (end < s_.size() && s_[end] != ',' && s_[end] != ']' &&
             !std::isspace(static_cast<unsigned char>(s_[end]))) {
        ++end;
      }
      const std::string token = s_.substr(pos_, end - pos_);
      pos_ = end;
      if (token == "true" || token == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.boolean = token == "true";
        v.text = token;
      } else {
        v.kind = TomlValue::Kind::number;
        v.text = token;
        char* stop = nullptr;
        errno = 0;
        v.number = std::strtod(token.c_str(), &stop);
        if (token.empty() || stop != token.c_str() + token.size() || errno == ERANGE) {
          fail(line_, "malformed value '" + token + "'");
        }
      }
    }
    return v;
  }

  std::string string_literal() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size()) {
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(line_, std::string("unsupported escape '\\") + e + "'");
        }
      } else {
        out += c;
      }
    }
    fail(line_, "unterminated string");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
};

}  // namespace

TomlDocument parse_toml(const std::string& text) {
  TomlDocument doc;
  TomlTable* current = &doc.root;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.rfind("[[", 0) == 0) {
      if (line.size() < 4 || line.substr(line.size() - 2) != "]]") fail(line_no, "malformed table-array header");
      const std::string name = trim(line.substr(2, line.size() - 4));
      if (!valid_key(name)) fail(line_no, "invalid table name '" + name + "'");
      auto& arr = doc.table_arrays[name];
      arr.emplace_back();
      arr.back().line = line_no;
      current = &arr.back();
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed table header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) fail(line_no, "invalid table name '" + name + "'");
      if (doc.tables.count(name)) fail(line_no, "duplicate table [" + name + "]");
      current = &doc.tables[name];
      current->line = line_no;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) fail(line_no, "invalid key '" + key + "'");
    for (const auto& [k, v] : current->entries) {
      if (k == key) fail(line_no, "duplicate key '" + key + "'");
    }
    const std::string value_text = trim(line.substr(eq + 1));
    current->entries.emplace_back(key, ValueParser(value_text, line_no).parse());
  }
  return doc;
}

double toml_number(const TomlValue& v, const std::string& key) {
  if (v.kind != TomlValue::Kind::number) fail(v.line, "'" + key + "' must be a number");
  return v.number;
}

std::uint64_t toml_unsigned(const TomlValue& v, const std::string& key) {
  if (v.kind != TomlValue::Kind::number) fail(v.line, "'" + key + "' must be an integer");
  char* stop = nullptr;
  errno = 0;
  const unsigned long long x = std::strtoull(v.text.c_str(), &stop, 10);
  if (v.text.empty() || v.text[0] == '-' || stop != v.text.c_str() + v.text.size() ||
      errno == ERANGE) {
    fail(v.line, "'" + key + "' must be a nonnegative integer");
  }
  return x;
}

bool toml_bool(const TomlValue& v, const std::string& key) {
  if (v.kind != TomlValue::Kind::boolean) fail(v.line, "'" + key + "' must be true or false");
  return v.boolean;
}

std::string toml_string(const TomlValue& v, const std::string& key) {
  if (v.kind != TomlValue::Kind::string) fail(v.line, "'" + key + "' must be a string");
  return v.text;
}

bool RunConfig::operator==(const RunConfig& o) const {
  auto params_eq = [](const ModelParams& a, const ModelParams& b) {
    return a.g == b.g && a.G == b.G && a.E_mag == b.E_mag && a.E_phase == b.E_phase &&
           a.gamma1 == b.gamma1 && a.gamma2 == b.gamma2 && a.omega_c == b.omega_c &&
           a.omega_b == b.omega_b;
  };
  auto sim_eq = [](const SimConfig& a, const SimConfig& b) {
    return a.dt == b.dt && a.t_transient == b.t_transient && a.t_record == b.t_record &&
           a.n_traj == b.n_traj && a.seed == b.seed && a.divergence_radius == b.divergence_radius &&
           a.scheme == b.scheme && a.initial == b.initial &&
           a.sample_interval == b.sample_interval && a.correlation_lags == b.correlation_lags &&
           a.spectral_segments == b.spectral_segments &&
           a.dump_path == b.dump_path && a.threads == b.threads;
  };
  return params_eq(params, o.params) && omega_max == o.omega_max &&
         omega_points == o.omega_points && theta == o.theta && sim_eq(sim, o.sim) &&
         linearized == o.linearized && sim_omega_max == o.sim_omega_max &&
         sim_omega_points == o.sim_omega_points && out_dir == o.out_dir && format == o.format &&
         as_printed == o.as_printed;
}

namespace {

std::size_t to_count(const TomlValue& v, const std::string& key) {
  return static_cast<std::size_t>(toml_unsigned(v, key));
}

void apply_model(RunConfig& cfg, const std::string& key, const TomlValue& v) {
  ModelParams& p = cfg.params;
  if (key == "g") p.g = toml_number(v, key);
  else if (key == "G") p.G = toml_number(v, key);
  else if (key == "E") p.E_mag = toml_number(v, key);
  else if (key == "E_phase") p.E_phase = toml_number(v, key);
  else if (key == "gamma1") p.gamma1 = toml_number(v, key);
  else if (key == "gamma2") p.gamma2 = toml_number(v, key);
  else if (key == "omega_c") p.omega_c = toml_number(v, key);
  else if (key == "omega_b") p.omega_b = toml_number(v, key);
  else fail(v.line, "unknown key 'model." + key + "'");
}

void apply_grid(RunConfig& cfg, const std::string& key, const TomlValue& v) {
  if (key == "omega_max") cfg.omega_max = toml_number(v, key);
  else if (key == "omega_points") cfg.omega_points = to_count(v, key);
  else if (key == "theta") cfg.theta = toml_number(v, key);
  else fail(v.line, "unknown key 'grid." + key + "'");
}

void apply_simulation(RunConfig& cfg, const std::string& key, const TomlValue& v) {
  SimConfig& s = cfg.sim;
  if (key == "dt") s.dt = toml_number(v, key);
  else if (key == "t_transient") s.t_transient = toml_number(v, key);
  else if (key == "t_record") s.t_record = toml_number(v, key);
  else if (key == "n_traj") s.n_traj = to_count(v, key);
  else if (key == "seed") s.seed = toml_unsigned(v, key);
  else if (key == "divergence_radius") s.divergence_radius = toml_number(v, key);
  else if (key == "scheme") s.scheme = parse_scheme(toml_string(v, key));
  else if (key == "initial") s.initial = parse_initial_state(toml_string(v, key));
  else if (key == "sample_interval") s.sample_interval = toml_number(v, key);
  else if (key == "correlation_lags") s.correlation_lags = to_count(v, key);
  else if (key == "spectral_segments") s.spectral_segments = to_count(v, key);
  else if (key == "dump_path") s.dump_path = toml_string(v, key);
  else if (key == "threads") s.threads = to_count(v, key);
  else if (key == "linearized") cfg.linearized = toml_bool(v, key);
  else if (key == "omega_max") cfg.sim_omega_max = toml_number(v, key);
  else if (key == "omega_points") cfg.sim_omega_points = to_count(v, key);
  else fail(v.line, "unknown key 'simulation." + key + "'");
}

void apply_output(RunConfig& cfg, const std::string& key, const TomlValue& v) {
  if (key == "out") cfg.out_dir = toml_string(v, key);
  else if (key == "format") {
    cfg.format = toml_string(v, key);
    if (cfg.format != "csv" && cfg.format != "json") fail(v.line, "'format' must be csv or json");
  } else if (key == "as_printed") cfg.as_printed = toml_bool(v, key);
  else fail(v.line, "unknown key 'output." + key + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const TomlDocument doc = parse_toml(text);
  if (!doc.table_arrays.empty()) {
    fail(doc.table_arrays.begin()->second.front().line,
         "unknown table array [[" + doc.table_arrays.begin()->first + "]]");
  }
  RunConfig cfg;
  // Top-level keys are read as model parameters.
  for (const auto& [k, v] : doc.root.entries) apply_model(cfg, k, v);
  for (const auto& [name, table] : doc.tables) {
    for (const auto& [k, v] : table.entries) {
      if (name == "model") apply_model(cfg, k, v);
      else if (name == "grid") apply_grid(cfg, k, v);
      else if (name == "simulation") apply_simulation(cfg, k, v);
      else if (name == "output") apply_output(cfg, k, v);
      else fail(table.line, "unknown table [" + name + "]");
    }
  }
  return cfg;
}

std::string dump_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  auto num = [&](const char* key, double v) { os << key << " = " << format_double(v) << '\n'; };
  auto str = [&](const char* key, const std::string& v) {
    os << key << " = \"";
    for (char c : v) {
      if (c == '"' || c == '\\') os << '\\';
      if (c == '\n') { os << "\\n"; continue; }
      os << c;
    }
    os << "\"\n";
  };
  const ModelParams& p = cfg.params;
  os << "[model]\n";
  num("g", p.g);
  num("G", p.G);
  num("E", p.E_mag);
  num("E_phase", p.E_phase);
  num("gamma1", p.gamma1);
  num("gamma2", p.gamma2);
  if (p.omega_c) num("omega_c", *p.omega_c);
  if (p.omega_b) num("omega_b", *p.omega_b);

  os << "\n[grid]\n";
  if (cfg.omega_max) num("omega_max", *cfg.omega_max);
  os << "omega_points = " << cfg.omega_points << '\n';
  if (cfg.theta) num("theta", *cfg.theta);

  const SimConfig& s = cfg.sim;
  os << "\n[simulation]\n";
  if (s.dt) num("dt", *s.dt);
  if (s.t_transient) num("t_transient", *s.t_transient);
  num("t_record", s.t_record);
  os << "n_traj = " << s.n_traj << '\n';
  os << "seed = " << s.seed << '\n';
  if (s.divergence_radius) num("divergence_radius", *s.divergence_radius);
  str("scheme", to_string(s.scheme));
  str("initial", to_string(s.initial));
  num("sample_interval", s.sample_interval);
  os << "correlation_lags = " << s.correlation_lags << '\n';
  os << "spectral_segments = " << s.spectral_segments << '\n';
  if (!s.dump_path.empty()) str("dump_path", s.dump_path);
  os << "threads = " << s.threads << '\n';
  os << "linearized = " << (cfg.linearized ? "true" : "false") << '\n';
  if (cfg.sim_omega_max) num("omega_max", *cfg.sim_omega_max);
  os << "omega_points = " << cfg.sim_omega_points << '\n';

  os << "\n[output]\n";
  str("out", cfg.out_dir);
  str("format", cfg.format);
  os << "as_printed = " << (cfg.as_printed ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace squeezelab
