#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "squeezelab/sde.hpp"

namespace squeezelab {

// Minimal TOML subset used for run configurations and sweep specs: comments,
// [table], [[array-of-tables]], and key = string | number | bool | flat array.
struct TomlValue {
  enum class Kind { string, number, boolean, array };
  Kind kind = Kind::string;
  std::string text;  // string contents, or the literal text of a number
  double number = 0.0;
  bool boolean = false;
  std::vector<TomlValue> items;
  int line = 0;
};

struct TomlTable {
  std::vector<std::pair<std::string, TomlValue>> entries;
  int line = 0;
};

struct TomlDocument {
  TomlTable root;
  std::map<std::string, TomlTable> tables;
  std::map<std::string, std::vector<TomlTable>> table_arrays;
};

TomlDocument parse_toml(const std::string& text);

double toml_number(const TomlValue& v, const std::string& key);
std::uint64_t toml_unsigned(const TomlValue& v, const std::string& key);
bool toml_bool(const TomlValue& v, const std::string& key);
std::string toml_string(const TomlValue& v, const std::string& key);

/// Everything a CLI run needs. Serialized with dump_run_config, which
/// parse_run_config reads back to an equal value.
struct RunConfig {
  ModelParams params;
  // [grid]
  std::optional<double> omega_max;
  std::size_t omega_points = 401;
  std::optional<double> theta;
  // [simulation]
  SimConfig sim;
  bool linearized = false;
  std::optional<double> sim_omega_max;
  std::size_t sim_omega_points = 41;
  // [output]
  std::string out_dir = ".";
  std::string format = "csv";
  bool as_printed = false;

  bool operator==(const RunConfig& other) const;
};

/// Throws Error{invalid_config} on unknown keys or malformed values.
RunConfig parse_run_config(const std::string& text);
std::string dump_run_config(const RunConfig& cfg);

}  // namespace squeezelab
