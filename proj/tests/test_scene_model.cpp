#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "roadwarp/scenario_io.hpp"
#include "roadwarp/scene.hpp"
#include "roadwarp/synthetic.hpp"
#include "support/oracles.hpp"

using namespace roadwarp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("roadwarp_scene_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string minimal_json() {
  std::string hist;
  for (int i = 0; i < 20; ++i) hist += (i ? "," : "") + std::string("[") + std::to_string(i - 19) + ",0]";
  return R"({"id":"min","dt":0.1,"lanes":[[[-30,0],[30,0]]],"history":[)" + hist + R"(],"agents":[]})";
}

void expect_all_points_near(const Scenario& a, const Scenario& b, double tol) {
  Scenario x = a, y = b;
  std::vector<Point2> pa, pb;
  for_each_point(x, [&](Point2& p) { pa.push_back(p); });
  for_each_point(y, [&](Point2& p) { pb.push_back(p); });
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_NEAR(pa[i].x, pb[i].x, tol);
    EXPECT_NEAR(pa[i].y, pb[i].y, tol);
  }
}

}  // namespace

TEST(ScenarioIo, MinimalFileDerivesCorridor) {
  const auto scn = parse_scenario(minimal_json());
  EXPECT_EQ(scn.id, "min");
  ASSERT_EQ(scn.scene.lanes.size(), 1u);
  ASSERT_EQ(scn.scene.drivable.size(), 1u);
  EXPECT_EQ(scn.history.points.size(), 20u);
  EXPECT_FALSE(scn.gt_future.has_value());
}

TEST(ScenarioIo, MissingHistoryIsInvariantViolation) {
  try {
    parse_scenario(R"({"id":"x","dt":0.1,"lanes":[[[0,0],[10,0]]],"agents":[]})");
    FAIL() << "expected an error";
  } catch (const InvariantError& e) {
    EXPECT_STREQ(e.what(), "invariant violation: history empty");
  }
}

TEST(ScenarioIo, ErrorsCarryFieldPath) {
  try {
    parse_scenario(R"({"id":"x","dt":0.1,"lanes":[[[0,0],[0,0]]],"history":[[0,0]]})");
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("scene.lanes[0][1]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_scenario(R"({"id":"x","dt":0.1,"lanes":[[[0,"a"],[1,0]]],"history":[[0,0]]})"), ParseError);
  EXPECT_THROW(parse_scenario("{not json"), ParseError);
  EXPECT_THROW(parse_scenario(R"({"id":"x","lanes":[],"history":[[0,0]]})"), ParseError);  // no dt
}

TEST(ScenarioIo, RoundTripIsByteIdentical) {
  const auto dir = temp_dir("roundtrip");
  for (const auto& scn : synth::scenario_corpus(3, {4, 4, 1, 1})) {
    const auto p1 = dir / "a.json";
    const auto p2 = dir / "b.json";
    save_scenario(scn, p1);
    const auto loaded = load_scenario(p1);
    EXPECT_EQ(loaded, scn);
    save_scenario(loaded, p2);
    EXPECT_EQ(io::read_file(p1), io::read_file(p2));
  }
}

TEST(Normalize, FrameDefinition) {
  Scenario scn = oracle::straight();
  // rotate so the history heads along +y and ends at (5, 3)
  scn = transformed(scn, Pose{{5.0, 3.0}, std::numbers::pi / 2});
  const auto [local, pose] = normalize(scn);
  EXPECT_NEAR(local.history.points.back().x, 0.0, 1e-12);
  EXPECT_NEAR(local.history.points.back().y, 0.0, 1e-12);
  const Point2 d = local.history.points.back() - local.history.points[18];
  EXPECT_NEAR(std::atan2(d.y, d.x), 0.0, 1e-12);
  EXPECT_NEAR(pose.translation.x, 5.0, 1e-12);
  EXPECT_NEAR(pose.rotation, std::numbers::pi / 2, 1e-12);
}

TEST(Normalize, AlreadyNormalizedGivesIdentity) {
  const auto [local, pose] = normalize(oracle::straight());
  EXPECT_TRUE(pose.is_identity());
  EXPECT_EQ(local, oracle::straight());
}

TEST(Normalize, DegenerateHeadingThrows) {
  EXPECT_THROW(normalize(oracle::straight(0.0)), InvariantError);
}

TEST(Normalize, RoundTripsAndPreservesDistances) {
  std::mt19937_64 rng(9);
  for (const auto& base : synth::scenario_corpus(5, {5, 5, 2, 0})) {
    const Scenario scn = synth::placed(base, rng);
    const auto [local, pose] = normalize(scn);
    expect_all_points_near(denormalize(local, pose), scn, 1e-9);
    // denormalize then normalize
    const auto [again, pose2] = normalize(denormalize(local, pose));
    expect_all_points_near(again, local, 1e-9);
    // pairwise distances on a subset of points
    Scenario a = scn, b = local;
    std::vector<Point2> pa, pb;
    for_each_point(a, [&](Point2& p) { pa.push_back(p); });
    for_each_point(b, [&](Point2& p) { pb.push_back(p); });
    for (std::size_t i = 0; i < pa.size(); i += 37)
      for (std::size_t j = i + 1; j < pa.size(); j += 53)
        EXPECT_NEAR(distance(pa[i], pa[j]), distance(pb[i], pb[j]), 1e-9);
  }
}

TEST(Denormalize, IdentityAndTranslation) {
  const Scenario scn = oracle::straight();
  EXPECT_EQ(denormalize(scn, Pose{}), scn);
  const Scenario moved = denormalize(scn, Pose{{1.0, 0.0}, 0.0});
  EXPECT_DOUBLE_EQ(moved.history.points.back().x, scn.history.points.back().x + 1.0);
  EXPECT_DOUBLE_EQ(moved.scene.lanes[0].points[0].x, scn.scene.lanes[0].points[0].x + 1.0);
  EXPECT_DOUBLE_EQ(moved.scene.lanes[0].points[0].y, scn.scene.lanes[0].points[0].y);
}

TEST(Resample, UniformSubdivision) {
  const auto r = resample_polyline(Polyline{{{0, 0}, {10, 0}}}, 1.0);
  ASSERT_EQ(r.points.size(), 11u);
  for (std::size_t i = 0; i < 11; ++i) EXPECT_NEAR(r.points[i].x, static_cast<double>(i), 1e-12);
  const auto e = resample_polyline(Polyline{{{0, 0}, {10, 0}}}, 50.0);
  EXPECT_EQ(e.points.size(), 2u);
  EXPECT_THROW(resample_polyline(Polyline{{{0, 0}, {1, 0}}}, 0.0), InvariantError);
}

TEST(Resample, PreservesArcLengthAndShape) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> c(-50, 50), sp(0.1, 7.0);
  for (int t = 0; t < 200; ++t) {
    Polyline p;
    for (int i = 0; i < 6; ++i) p.points.push_back({c(rng), c(rng)});
    const double spacing = sp(rng);
    const auto r = resample_polyline(p, spacing);
    EXPECT_NEAR(arc_length(r.points), arc_length(p.points), 1e-9);
    EXPECT_EQ(r.points.front(), p.points.front());
    EXPECT_EQ(r.points.back(), p.points.back());
    for (std::size_t i = 1; i < r.points.size(); ++i) EXPECT_LE(distance(r.points[i - 1], r.points[i]), spacing + 1e-9);
    // Hausdorff: every output vertex on the input, every input vertex in the output
    for (const auto& q : r.points) {
      double d = 1e300;
      for (std::size_t i = 1; i < p.points.size(); ++i) d = std::min(d, oracle::seg_dist(q, p.points[i - 1], p.points[i]));
      EXPECT_LE(d, 1e-9);
    }
    for (const auto& v : p.points) EXPECT_NE(std::find(r.points.begin(), r.points.end(), v), r.points.end());
  }
}

TEST(DrivableArea, StraightLaneMatchesBufferOracle) {
  Scene s;
  s.lanes.push_back(Polyline{{{0, 0}, {10, 0}}});
  const Scene d = derive_drivable_area(s);
  ASSERT_EQ(d.drivable.size(), 1u);
  const auto bb = bounding_box(d.drivable[0].ring);
  EXPECT_NEAR(bb.min_x, -1.75, 1e-12);
  EXPECT_NEAR(bb.max_x, 11.75, 1e-12);
  EXPECT_NEAR(bb.min_y, -1.75, 1e-12);
  EXPECT_NEAR(bb.max_y, 1.75, 1e-12);
  // dense sampling against the analytic squared-cap rectangle
  for (double x = -3.0; x <= 13.0; x += 0.13)
    for (double y = -3.0; y <= 3.0; y += 0.11) {
      const bool expect = x >= -1.75 && x <= 11.75 && y >= -1.75 && y <= 1.75;
      const bool near_edge = std::abs(std::abs(y) - 1.75) < 1e-7 || std::abs(x + 1.75) < 1e-7 || std::abs(x - 11.75) < 1e-7;
      if (!near_edge) EXPECT_EQ(point_in_ring({x, y}, d.drivable[0].ring), expect) << x << "," << y;
    }
  for (std::size_t i = 0; i < d.drivable[0].ring.size(); ++i)
    EXPECT_LE(distance(d.drivable[0].ring[i], d.drivable[0].ring[(i + 1) % d.drivable[0].ring.size()]), 0.5 + 1e-12);
}

TEST(DrivableArea, ExplicitPolygonsKept) {
  Scene s;
  s.lanes.push_back(Polyline{{{0, 0}, {10, 0}}});
  s.drivable.push_back(Polygon{{{-1, -1}, {11, -1}, {11, 1}, {-1, 1}}});
  EXPECT_EQ(derive_drivable_area(s), s);
}

TEST(DrivableArea, ContainsEveryLaneVertex) {
  std::mt19937_64 rng(2);
  const auto tiles = synth::tile_corpus(17, 60);
  std::size_t checked = 0;
  for (const auto& t : tiles) {
    const Scene d = derive_drivable_area(t.tile);
    for (const auto& lane : d.lanes)
      for (const auto& p : lane.points) {
        bool in = false;
        for (const auto& poly : d.drivable) in = in || point_in_ring(p, poly.ring);
        EXPECT_TRUE(in);
        ++checked;
      }
    for (const auto& poly : d.drivable) EXPECT_FALSE(ring_self_intersects(poly.ring));
  }
  EXPECT_GT(checked, 1000u);
}
