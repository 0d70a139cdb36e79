#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace squeezelab {

inline constexpr const char* kToolVersion = "0.1.0";

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

class CsvWriter {
 public:
  void header(const std::vector<std::string>& columns);
  CsvWriter& cell(double v);
  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(const char* v) { return cell(std::string(v)); }
  CsvWriter& cell(bool v);
  CsvWriter& empty();
  void end_row();
  std::string str() const { return out_.str(); }

 private:
  void sep();
  std::ostringstream out_;
  bool first_ = true;
};

}  // namespace squeezelab
