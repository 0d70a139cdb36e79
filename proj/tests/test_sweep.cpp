#include <gtest/gtest.h>

#include <filesystem>

#include "squeezelab/io.hpp"
#include "squeezelab/sweep.hpp"

using namespace squeezelab;

namespace {

ModelParams unit_rates() {
  ModelParams p;
  p.g = 1.0;
  p.gamma1 = 1.0;
  p.gamma2 = 1.0;
  p.G = 0.1;
  p.E_mag = std::sqrt(5.0);
  return p;
}

SweepSpec two_axis_spec() {
  SweepSpec spec;
  spec.fixed = unit_rates();
  spec.axes = {{"G", 0.0, 1.0, 21, false}, {"E", 0.5, 5.0, 19, false}};
  return spec;
}

}  // namespace

TEST(Axis, LinearAndLogValues) {
  const SweepAxis lin{"G", 0.0, 1.0, 5, false};
  EXPECT_EQ(lin.values(), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  const SweepAxis lg{"E", 0.01, 100.0, 5, true};
  const auto v = lg.values();
  EXPECT_EQ(v.front(), 0.01);
  EXPECT_EQ(v.back(), 100.0);
  EXPECT_NEAR(v[2], 1.0, 1e-12);
}

TEST(Spec, ValidationAndBudget) {
  SweepSpec spec = two_axis_spec();
  EXPECT_NO_THROW(spec.validate());
  spec.axes[0].count = 1;
  EXPECT_THROW(spec.validate(), Error);
  spec = two_axis_spec();
  spec.axes[1].name = "omega";
  EXPECT_THROW(spec.validate(), Error);
  spec = two_axis_spec();
  spec.axes[0].log = true;  // min = 0
  EXPECT_THROW(spec.validate(), Error);
  spec = two_axis_spec();
  spec.budget = 100;
  try {
    run_sweep(spec);
    FAIL() << "expected budget_exceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::budget_exceeded);
  }
  spec = two_axis_spec();
  spec.axes.push_back({"g", 0.1, 1.0, 1000, false});
  spec.axes.push_back({"gamma1", 0.1, 1.0, 1000, false});
  EXPECT_THROW(spec.validate(), Error);  // four axes
}

TEST(Spec, ParsesTomlFile) {
  const SweepSpec spec = parse_sweep_spec(R"(
budget = 5000
outputs = ["n2", "S_minus_0"]
[fixed]
g = 1
gamma1 = 1
gamma2 = 1
G = 0.1
[[axis]]
name = "E"
min = 0.1
max = 10
count = 11
spacing = "log"
)");
  ASSERT_EQ(spec.axes.size(), 1u);
  EXPECT_TRUE(spec.axes[0].log);
  EXPECT_EQ(spec.budget, 5000u);
  EXPECT_EQ(spec.outputs, (std::set<std::string>{"n2", "S_minus_0"}));
  EXPECT_EQ(spec.fixed.G, 0.1);
  EXPECT_THROW(parse_sweep_spec("[[axis]]\nname = \"G\"\n"), Error);
  EXPECT_THROW(parse_sweep_spec("bogus = 1\n"), Error);
}

TEST(ClassifyPoint, MatchesHandComposition) {
  const ModelParams p = unit_rates();
  const PointRecord r = classify_point(p);
  ASSERT_TRUE(r.ok);
  const SteadyState ss = solve_steady_state(p);
  const StabilityReport st = stability(p, ss);
  const QuadratureSpectrum q = output_quadrature_spectra(
      spectrum_matrix(linearize(p, ss), FrequencyGrid::from_values({0.0})), default_theta(ss),
      p.gamma1);
  EXPECT_EQ(r.n2, ss.n2);
  EXPECT_EQ(r.min_real_part, st.min_real_part);
  EXPECT_EQ(r.stable, st.stable);
  EXPECT_EQ(r.S_plus_0, q.S_plus[0]);
  EXPECT_EQ(r.S_minus_0, q.S_minus[0]);
  EXPECT_EQ(r.squeezed_minus, q.squeezed_minus);
  EXPECT_EQ(r.predicted.minus, squeezing_conditions(p, ss.n2).minus);
}

TEST(ClassifyPoint, UndrivenAndNonInteractingPoints) {
  ModelParams p = unit_rates();
  p.E_mag = 0.0;
  PointRecord r = classify_point(p);
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.n2, 0.0);
  EXPECT_TRUE(r.stable);
  EXPECT_EQ(r.S_plus_0, 0.0);
  EXPECT_EQ(r.S_minus_0, 0.0);
  EXPECT_TRUE(r.predicted.degenerate);
  EXPECT_FALSE(r.predicted.plus || r.predicted.minus);

  p = unit_rates();
  p.G = 0.0;
  p.E_mag = 3.0;
  r = classify_point(p);
  EXPECT_NEAR(r.n2, 9.0 / 4.0, 1e-14);
  EXPECT_EQ(r.S_plus_0, 0.0);
  EXPECT_EQ(r.S_minus_0, 0.0);
}

TEST(ClassifyPoint, InvalidParametersAreCapturedNotThrown) {
  ModelParams p = unit_rates();
  p.gamma2 = -1.0;
  const PointRecord r = classify_point(p);
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.status.find("invalid-parameters"), std::string::npos);
}

TEST(Sweep, InteractionAxisHasAnExactlyCoherentEdge) {
  SweepSpec spec;
  spec.fixed = unit_rates();
  spec.axes = {{"G", 0.0, 2.0, 11, false}};
  const RegionMap map = run_sweep(spec);
  EXPECT_EQ(map.points.front().S_plus_0, 0.0);
  EXPECT_EQ(map.points.front().S_minus_0, 0.0);
  for (const auto& r : map.points) {
    EXPECT_TRUE(r.ok);
    EXPECT_FALSE(r.stable && r.squeezed_plus && r.squeezed_minus);
  }
}

TEST(Sweep, DensityIncreasesAlongTheDriveAxis) {
  SweepSpec spec;
  spec.fixed = unit_rates();
  spec.axes = {{"E", 0.0, 50.0, 101, false}};
  const RegionMap map = run_sweep(spec);
  for (std::size_t k = 1; k < map.points.size(); ++k) {
    EXPECT_GT(map.points[k].n2, map.points[k - 1].n2);
  }
}

TEST(Sweep, IndependentOfThreadCount) {
  SweepSpec spec = two_axis_spec();
  spec.threads = 1;
  const RegionMap a = run_sweep(spec);
  spec.threads = 4;
  const RegionMap b = run_sweep(spec);
  EXPECT_EQ(a.points_csv(spec), b.points_csv(spec));
  EXPECT_EQ(a.boundaries_json().dump(), b.boundaries_json().dump());
}

TEST(Sweep, CanonicalBoundaryMatchesPredicateWhereTheyAgree) {
  const SweepSpec spec = two_axis_spec();
  const RegionMap map = run_sweep(spec);
  const std::size_t nG = spec.axes[0].count, nE = spec.axes[1].count;
  auto at = [&](std::size_t i, std::size_t j) -> const PointRecord& { return map.points[i * nE + j]; };
  auto agrees = [](const PointRecord& r) {
    return r.ok && !r.predicted.degenerate && r.predicted.minus == r.squeezed_minus;
  };
  std::size_t edges_checked = 0;
  for (std::size_t i = 0; i < nG; ++i) {
    for (std::size_t j = 0; j < nE; ++j) {
      for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
        if (i + di >= nG || j + dj >= nE) continue;
        const PointRecord& a = at(i, j);
        const PointRecord& b = at(i + di, j + dj);
        if (!agrees(a) || !agrees(b)) continue;
        ++edges_checked;
        EXPECT_EQ(a.squeezed_minus != b.squeezed_minus, a.predicted.minus != b.predicted.minus);
      }
    }
  }
  EXPECT_GT(edges_checked, 100u);

  std::size_t disagreements = 0;
  for (const auto& r : map.points) {
    if (r.ok && !r.predicted.degenerate &&
        (r.predicted.minus != r.squeezed_minus || r.predicted.plus != r.squeezed_plus)) {
      ++disagreements;
    }
  }
  EXPECT_EQ(map.reconciliation_json()["disagreements"].get<std::size_t>(), disagreements);
}

TEST(Boundaries, OneDimensionalCrossingsAtCellMidpoints) {
  const std::vector<SweepAxis> axes = {{"E", 0.0, 4.0, 5, false}};
  const auto lines = extract_boundaries(axes, {1, 1, -1, 0, 1});
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0].points, (std::vector<std::vector<double>>{{1.5}}));
}

TEST(Boundaries, TwoDimensionalStraightContour) {
  const std::vector<SweepAxis> axes = {{"G", 0.0, 1.0, 3, false}, {"E", 0.0, 1.0, 3, false}};
  std::vector<int> sign(9);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) sign[i * 3 + j] = i < 2 ? -1 : 1;
  }
  const auto lines = extract_boundaries(axes, sign);
  ASSERT_EQ(lines.size(), 1u);
  ASSERT_EQ(lines[0].points.size(), 3u);
  for (const auto& pt : lines[0].points) EXPECT_EQ(pt[0], 0.75);
}

TEST(Boundaries, ThreeDimensionalSlicesCarryTheSliceCoordinate) {
  const std::vector<SweepAxis> axes = {
      {"g", 1.0, 2.0, 2, false}, {"G", 0.0, 1.0, 3, false}, {"E", 0.0, 1.0, 3, false}};
  std::vector<int> sign(18);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) sign[(k * 3 + i) * 3 + j] = j == 0 ? 1 : -1;
    }
  }
  const auto lines = extract_boundaries(axes, sign);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].points[0][0], 1.0);
  EXPECT_EQ(lines[1].points[0][0], 2.0);
  for (const auto& l : lines) {
    for (const auto& pt : l.points) EXPECT_EQ(pt[2], 0.25);
  }
}

TEST(Sweep, PersistsTheResultDirectory) {
  const SweepSpec spec = two_axis_spec();
  const RegionMap map = run_sweep(spec);
  const auto dir = std::filesystem::temp_directory_path() / "squeezelab_sweep_test";
  std::filesystem::remove_all(dir);
  write_region_map(map, spec, "# spec\n", dir);
  for (const char* f : {"spec.toml", "points.csv", "boundaries.json", "meta.json",
                        "reconciliation.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const std::string csv = read_text_file(dir / "points.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "G,E,n2,min_real_part,stable,S_plus_0,S_minus_0,squeezed_plus,squeezed_minus,status,"
            "predicted_plus,predicted_minus");
  std::filesystem::remove_all(dir);
}
