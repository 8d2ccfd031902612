#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "roadwarp/physics.hpp"
#include "roadwarp/synthetic.hpp"
#include "roadwarp/transforms.hpp"
#include "support/oracles.hpp"

using namespace roadwarp;

namespace {

Scene arc_scene(double radius, double sweep = std::numbers::pi / 2) {
  Scene s;
  s.lanes.push_back(Polyline{synth::PathBuilder({0, 0}, 0.0).straight(30.0).arc(radius, sweep, 0.25).straight(30.0).points()});
  return s;
}

double max_step_accel(const Trajectory& t) {
  double a = 0.0;
  for (std::size_t i = 2; i < t.points.size(); ++i) {
    const Point2 d2 = t.points[i] - 2.0 * t.points[i - 1] + t.points[i - 2];
    a = std::max(a, norm(d2) / (t.dt * t.dt));
  }
  return a;
}

Scenario random_scenario(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario scn;
  if (rng() % 2 == 0) {
    synth::ArcParams p;
    p.radius = 10.0 + 80.0 * u(rng);
    p.sweep = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.3 + 1.2 * u(rng));
    p.speed = 1.0 + 29.0 * u(rng);
    p.ego_s = 40.0 + 30.0 * u(rng);
    scn = synth::arc_scenario("r", p);
    // uneven speeds so the maximum matters
    for (std::size_t i = 0; i + 1 < scn.history.points.size(); i += 3)
      scn.history.points[i] = scn.history.points[i] + Point2{0.3 * u(rng), 0.3 * u(rng)};
    Trajectory agent = scn.history;
    for (auto& p2 : agent.points) p2 = p2 + Point2{0.0, 3.0};
    scn.agents.push_back(agent);
  } else {
    synth::StraightParams p;
    p.speed = 30.0 * u(rng);
    scn = synth::straight_scenario("s", p);
    const TransformSpec spec{SmoothTurnParams{10.0 + 10.0 * u(rng), (u(rng) - 0.5) * 0.006, 3.0}, 5.0};
    scn = warp_scenario(scn, spec);
  }
  return synth::placed(scn, rng);
}

}  // namespace

TEST(Circumradius, Examples) {
  EXPECT_NEAR(circumradius({10, 0}, {0, 10}, {-10, 0}), 10.0, 1e-12);
  EXPECT_EQ(circumradius({0, 0}, {1, 0}, {2, 0}), kInf);
  EXPECT_NEAR(circumradius({0, 0}, {1, 1}, {2, 0}), 1.0, 1e-12);
  EXPECT_THROW(circumradius({0, 0}, {0, 0}, {2, 0}), InvariantError);
}

TEST(MinRadius, Examples) {
  Scene straight;
  straight.lanes.push_back(Polyline{{{0, 0}, {100, 0}}});
  EXPECT_EQ(min_radius(straight), kInf);
  EXPECT_NEAR(min_radius(arc_scene(20.0)), 20.0, 0.4);
  Scene both = arc_scene(50.0);
  both.lanes.push_back(arc_scene(20.0, -1.0).lanes[0]);
  EXPECT_NEAR(min_radius(both), 20.0, 0.4);
  EXPECT_THROW(min_radius(Scene{}), InvariantError);
}

TEST(MaxFeasibleSpeed, Examples) {
  EXPECT_NEAR(max_feasible_speed(20.0), std::sqrt(0.7 * 9.81 * 20.0), 1e-12);
  EXPECT_NEAR(max_feasible_speed(20.0), 11.719, 5e-4);
  EXPECT_EQ(max_feasible_speed(kInf), kInf);
  EXPECT_NEAR(max_feasible_speed(0.0001), 0.0262, 5e-5);
  EXPECT_THROW(max_feasible_speed(0.0), InvariantError);
}

TEST(EnforceFeasibility, StraightSceneUnchanged) {
  synth::StraightParams p;
  p.speed = 40.0;
  const auto scn = synth::straight_scenario("s", p);
  EXPECT_EQ(enforce_feasibility(scn), scn);
}

TEST(EnforceFeasibility, SlowsToRadiusLimit) {
  // 20 m/s history on a lane whose tightest radius is 20 m
  Scenario scn;
  scn.scene = arc_scene(20.0);
  scn.history.dt = 0.1;
  for (int i = 19; i >= 0; --i) scn.history.points.push_back({-2.0 * i, -5.0});
  scn.scene = derive_drivable_area(scn.scene);
  const auto out = enforce_feasibility(scn);
  const double v_max = max_feasible_speed(min_radius(scn.scene));
  EXPECT_NEAR(v_max, 11.719, 0.12);
  EXPECT_EQ(out.history.points.back(), scn.history.points.back());
  for (std::size_t i = 1; i < out.history.points.size(); ++i)
    EXPECT_NEAR(distance(out.history.points[i - 1], out.history.points[i]) / 0.1, v_max, 1e-9);
  // lambda-scaling oracle
  const double lambda = v_max / 20.0;
  for (std::size_t i = 0; i < out.history.points.size(); ++i)
    EXPECT_NEAR(out.history.points[i].x, -2.0 * (19 - static_cast<double>(i)) * lambda, 1e-9);
}

TEST(EnforceFeasibility, SlowHistoryBitwiseUnchanged) {
  synth::ArcParams p;
  p.radius = 40.0;
  p.speed = 5.0;
  const auto scn = synth::arc_scenario("a", p);
  EXPECT_EQ(enforce_feasibility(scn), scn);
}

TEST(EnforceFeasibility, RandomizedInvariants) {
  std::mt19937_64 rng(12);
  std::size_t slowed = 0;
  for (int t = 0; t < 1000; ++t) {
    const Scenario scn = random_scenario(rng);
    const Scenario once = enforce_feasibility(scn);
    EXPECT_EQ(enforce_feasibility(once), once);
    EXPECT_LE(distance(once.history.points.back(), scn.history.points.back()), 1e-12);
    const double v_max = max_feasible_speed(min_radius(scn.scene));
    if (std::isfinite(v_max)) EXPECT_LE(max_step_speed(once.history), v_max * (1.0 + 1e-9));
    if (once == scn) continue;
    ++slowed;
    // scaling increments about the anchor scales every second difference by lambda
    const double lambda = v_max / max_step_speed(scn.history);
    EXPECT_NEAR(max_step_accel(once.history), lambda * max_step_accel(scn.history),
                1e-9 * (1.0 + max_step_accel(scn.history)));
    EXPECT_LE(max_step_accel(once.history), max_step_accel(scn.history) * (1.0 + 1e-12) + 1e-9);
    // agents share the ego's factor
    ASSERT_EQ(once.agents.size(), scn.agents.size());
    for (std::size_t a = 0; a < scn.agents.size(); ++a)
      EXPECT_NEAR(max_step_speed(once.agents[a]), lambda * max_step_speed(scn.agents[a]), 1e-9);
  }
  EXPECT_GT(slowed, 100u);
}

TEST(EnforceFeasibility, MinRadiusShrinksWithPower) {
  const auto scn = oracle::straight(1.0, -40.0, 150.0);
  for (double a1 : {10.0, 20.0}) {
    double prev = kInf;
    for (double p = 0.5; p <= 9.0; p += 0.5) {
      const double r = min_radius(warp_scenario(scn, {SmoothTurnParams{a1, p / kPowerScale, 3.0}, 5.0}).scene);
      EXPECT_LE(r, prev * (1.0 + 1e-9)) << a1 << " " << p;
      prev = r;
    }
  }
  double prev = kInf;
  for (double g1 = 0.5; g1 <= 9.0; g1 += 0.5) {
    const double r = min_radius(warp_scenario(scn, {RippleParams{g1, 0.017}, 5.0}).scene);
    EXPECT_LE(r, prev * (1.0 + 1e-9)) << g1;
    prev = r;
  }
}
