#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "squeezelab/cli.hpp"
#include "squeezelab/config.hpp"
#include "squeezelab/io.hpp"

using namespace squeezelab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("squeezelab_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> reference_flags() {
  return {"--g", "1", "--G", "0.1", "--E", "2.2360679774997898", "--gamma1", "1", "--gamma2", "1"};
}

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

std::vector<std::vector<double>> read_csv(const std::string& text, std::vector<std::string>& header) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  header.clear();
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) header.push_back(c);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) row.push_back(std::stod(c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(Cli, SteadyLinearLimit) {
  const Result r = run({"steady", "--gamma1", "1", "--gamma2", "1", "--g", "1", "--G", "0", "--E", "2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("n2,1\n"), std::string::npos) << r.out;
}

TEST(Cli, SteadyZeroDrive) {
  const Result r = run({"steady", "--E", "0", "--G", "0.5", "--format", "json"});
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["n2"].get<double>(), 0.0);
  EXPECT_EQ(j["a2_re"].get<double>(), 0.0);
}

TEST(Cli, InvalidParameterExitsTwoNamingTheKey) {
  const Result r = run({"steady", "--gamma1", "-1", "--E", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("gamma1"), std::string::npos);
}

TEST(Cli, UnknownFlagOrConfigKeyExitsTwo) {
  EXPECT_EQ(run({"steady", "--gamma3", "1"}).code, 2);
  const fs::path dir = scratch("badcfg");
  fs::create_directories(dir);
  write_text_file(dir / "bad.toml", "[model]\ngama1 = 1\n");
  EXPECT_EQ(run({"steady", "--config", (dir / "bad.toml").string()}).code, 2);
  EXPECT_EQ(run({"steady", "--config", (dir / "missing.toml").string()}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, ConfigFileWithFlagOverridesAndDumpRoundTrip) {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  write_text_file(dir / "run.toml", "[model]\ng = 1\nG = 0\nE = 4\n");
  const Result r = run({"steady", "--config", (dir / "run.toml").string(), "--E", "2",
                        "--dump-config", (dir / "dumped.toml").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("n2,1\n"), std::string::npos);  // flag wins over file
  const std::string dumped = read_text_file(dir / "dumped.toml");
  const RunConfig back = parse_run_config(dumped);
  EXPECT_EQ(back.params.E_mag, 2.0);
  EXPECT_EQ(dump_run_config(back), dumped);
  fs::remove_all(dir);
}

TEST(Cli, StabilityReport) {
  const Result r = run(with({"stability"}, reference_flags()));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("stable,true"), std::string::npos);
}

TEST(Cli, SpectrumCoherentLimitIsZero) {
  const fs::path dir = scratch("spec0");
  const Result r = run({"spectrum", "--G", "0", "--E", "2", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> header;
  const auto rows = read_csv(read_text_file(dir / "spectrum.csv"), header);
  ASSERT_EQ(rows.size(), 401u);
  for (const auto& row : rows) {
    for (std::size_t c = 1; c < row.size(); ++c) ASSERT_EQ(row[c], 0.0) << header[c];
  }
  fs::remove_all(dir);
}

TEST(Cli, SpectrumSumIdentityRowwise) {
  const fs::path dir = scratch("spec");
  const Result r = run(with({"spectrum", "--out", dir.string()}, reference_flags()));
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> header;
  const auto rows = read_csv(read_text_file(dir / "spectrum.csv"), header);
  ASSERT_EQ(header.size(), 11u);
  for (const auto& row : rows) {
    const double s12 = row[3], s21 = row[5];
    const double scale = std::max({std::abs(row[1]), std::abs(row[2]), std::abs(s12), 1e-300});
    ASSERT_LT(std::abs(row[9] + row[10] - 4.0 * (s12 + s21)), 1e-10 * 4.0 * scale);
  }
  fs::remove_all(dir);
}

TEST(Cli, SpectrumAsPrintedWritesDeviationSummary) {
  const fs::path dir = scratch("printed");
  const Result r = run(with({"spectrum", "--as-printed", "--out", dir.string()}, reference_flags()));
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(dir / "deviation.json"));
  const auto j = nlohmann::json::parse(read_text_file(dir / "deviation.json"));
  EXPECT_TRUE(j.contains("entries"));
  std::vector<std::string> header;
  read_csv(read_text_file(dir / "spectrum.csv"), header);
  EXPECT_EQ(header.size(), 22u);
  fs::remove_all(dir);
}

TEST(Cli, ValidateReferencePasses) {
  const Result r = run(with({"validate"}, reference_flags()));
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}

TEST(Cli, ValidateCoherentFastPath) {
  const Result r = run({"validate", "--G", "0", "--E", "2"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("coherent_limit_spectra"), std::string::npos);
}

TEST(Cli, ValidateCorruptedDriftFailsJacobianCheck) {
  const Result r =
      run(with({"validate", "--test-corrupt-drift", "--sde-traj", "0"}, reference_flags()));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("drift_jacobian"), std::string::npos);
}

TEST(Cli, SweepBudgetExceededExitsTwo) {
  const fs::path dir = scratch("budget");
  fs::create_directories(dir);
  write_text_file(dir / "s.toml",
                  "budget = 10\n[[axis]]\nname = \"G\"\nmin = 0\nmax = 1\ncount = 11\n");
  EXPECT_EQ(run({"sweep", "--spec", (dir / "s.toml").string(), "--out", dir.string()}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, SweepCompletesWithPerPointFailures) {
  const fs::path dir = scratch("sweep");
  fs::create_directories(dir);
  // gamma2 axis crosses zero: those points fail validation but the sweep completes.
  write_text_file(dir / "s.toml",
                  "[fixed]\nG = 0.1\nE = 2\n[[axis]]\nname = \"gamma2\"\nmin = -1\nmax = 1\n"
                  "count = 5\n");
  const Result r = run({"sweep", "--spec", (dir / "s.toml").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("3 of 5"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "points.csv"));
  fs::remove_all(dir);
}

TEST(Cli, SimulateLinearizedWritesSpectraWithReferenceColumns) {
  const fs::path dir = scratch("sim");
  const Result r = run(with({"simulate", "--linearized", "--n-traj", "8", "--dt", "0.02",
                             "--t-record", "60", "--scheme", "semi_implicit_midpoint",
                             "--sim-omega-max", "2", "--sim-omega-points", "5", "--out",
                             dir.string()},
                            reference_flags()));
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> header;
  const auto rows = read_csv(read_text_file(dir / "sde_spectra.csv"), header);
  EXPECT_EQ(rows.size(), 5u);
  EXPECT_EQ(header.size(), 1u + 16u + 8u);
  EXPECT_TRUE(fs::exists(dir / "ensemble.json"));
  fs::remove_all(dir);
}

TEST(Cli, SimulateDivergenceExitsFive) {
  const fs::path dir = scratch("diverge");
  fs::create_directories(dir);
  write_text_file(dir / "c.toml", "[simulation]\ndivergence_radius = 0.1\n");
  const Result r = run(with({"simulate", "--config", (dir / "c.toml").string(), "--n-traj", "2",
                             "--dt", "0.01", "--t-record", "60", "--out", dir.string()},
                            reference_flags()));
  EXPECT_EQ(r.code, 5) << r.err;
  fs::remove_all(dir);
}

TEST(Cli, BinaryReportsExitCodes) {
  const char* exe = std::getenv("SQUEEZELAB_CLI");
  if (!exe) GTEST_SKIP() << "SQUEEZELAB_CLI not set";
  const std::string base = std::string("\"") + exe + "\" ";
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  EXPECT_EQ(status(base + "steady --G 0 --E 2"), 0);
  EXPECT_EQ(status(base + "steady --gamma1 -1"), 2);
  EXPECT_EQ(status(base + "validate --G 0.1 --E 2 --test-corrupt-drift --sde-traj 0"), 4);
}
