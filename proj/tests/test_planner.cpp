#include <doctest.h>

#include <random>

#include "wireharness/errors.hpp"
#include "wireharness/planner.hpp"

using namespace wireharness;
using namespace wireharness::planner;

namespace {

Waypoint at(double x, double y, double f_d = kCClampForce, std::string id = "w") {
  return {{x, y}, f_d, {{WaypointRole::CTip, std::move(id)}}};
}

std::vector<ClampSpec> random_board(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-400.0, 400.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> off(5.0, 60.0);
  std::uniform_int_distribution<int> count(1, 6);
  std::bernoulli_distribution is_c(0.5);
  std::vector<ClampSpec> board;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    ClampSpec c;
    c.id = "K" + std::to_string(i);
    c.kind = is_c(rng) ? ClampKind::C : ClampKind::U;
    c.center = {pos(rng), pos(rng)};
    c.orientation = ang(rng);
    c.geometry = {off(rng), off(rng), off(rng), off(rng)};
    board.push_back(c);
  }
  return board;
}

}  // namespace

TEST_SUITE("planner") {

TEST_CASE("U-clamp gets two 10 N waypoints") {
  ClampSpec u{"U1", ClampKind::U, {0, 100}, 0.0, {}};
  const auto wps = clamp_waypoints(u, {-200, 100});
  REQUIRE(wps.size() == 2);
  CHECK(wps[0].f_d == 10.0);
  CHECK(wps[1].f_d == 10.0);
  CHECK(wps[0].has_role(WaypointRole::UPre));
  CHECK(wps[1].has_role(WaypointRole::UInsert));
  CHECK(wps[0].position == Pose2D{-20, 100});
  CHECK(wps[1].position == Pose2D{30, 100});
  // Approached from the other end the traversal flips.
  const auto back = clamp_waypoints(u, {200, 100});
  CHECK(back[0].position == Pose2D{20, 100});
  CHECK(back[1].position == Pose2D{-30, 100});
}

TEST_CASE("C-clamp gets side, tip, side at 7 N with the nearer side first") {
  ClampSpec c{"C1", ClampKind::C, {0, 0}, kPi / 2, {}};
  const auto wps = clamp_waypoints(c, {100, -50});
  REQUIRE(wps.size() == 3);
  CHECK(wps[0].has_role(WaypointRole::CSide1));
  CHECK(wps[1].has_role(WaypointRole::CTip));
  CHECK(wps[2].has_role(WaypointRole::CSide2));
  for (const auto& w : wps) CHECK(w.f_d == 7.0);
  CHECK(wps[0].position.x == doctest::Approx(25.0));
  CHECK(wps[2].position.x == doctest::Approx(-25.0));
  CHECK(wps[1].position.y == doctest::Approx(25.0));
}

TEST_CASE("equidistant approach breaks ties by smaller x then y") {
  ClampSpec c{"C1", ClampKind::C, {0, 0}, kPi / 2, {}};
  const auto wps = clamp_waypoints(c, {0, -100});
  CHECK(wps[0].position.x < wps[2].position.x);
  ClampSpec h{"C2", ClampKind::C, {0, 0}, 0.0, {}};
  const auto v = clamp_waypoints(h, {-100, 0});
  CHECK(v[0].position.y < v[2].position.y);
}

TEST_CASE("pairwise merge threshold") {
  const auto close = merge_waypoints({at(0, 0), at(15, 0, kUClampForce, "u")});
  REQUIRE(close.size() == 1);
  CHECK(close[0].position == Pose2D{7.5, 0});
  CHECK(close[0].f_d == 10.0);
  CHECK(close[0].tags.size() == 2);
  CHECK(merge_waypoints({at(0, 0), at(50, 0)}).size() == 2);
  // Exactly 40 mm apart: each is 20 mm from the mean.
  CHECK(merge_waypoints({at(0, 0), at(40, 0)}).size() == 1);
  CHECK(merge_waypoints({at(0, 0), at(40.001, 0)}).size() == 2);
}

TEST_CASE("merging never joins non-adjacent waypoints") {
  const auto out = merge_waypoints({at(0, 0), at(200, 0), at(0, 1)});
  CHECK(out.size() == 3);
}

TEST_CASE("single U-clamp board plan length") {
  ClampSpec u{"U1", ClampKind::U, {0, 100}, 0.0, {}};
  CHECK(plan({u}, {-200, 100}).size() == 2);
  u.geometry.u_pre_offset = 5.0;
  u.geometry.u_insert_offset = 5.0;
  CHECK(plan({u}, {-200, 100}).size() == 1);
}

TEST_CASE("empty board and unknown kind") {
  CHECK_THROWS_AS(plan({}, {0, 0}), ConfigError);
  CHECK_THROWS_AS(clamp_kind_from_string("Z"), ConfigError);
  CHECK(clamp_kind_from_string("C") == ClampKind::C);
  CHECK(clamp_kind_from_string("U") == ClampKind::U);
}

TEST_CASE("planner properties over random boards") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(-400.0, 400.0);
  for (int b = 0; b < 1000; ++b) {
    const auto board = random_board(rng);
    const Pose2D start{pos(rng), pos(rng)};
    const auto raw = plan_unmerged(board, start);
    const auto merged = plan(board, start);

    // Tip strictly between sides for every C-clamp.
    for (const auto& c : board) {
      if (c.kind != ClampKind::C) continue;
      int s1 = -1, tip = -1, s2 = -1;
      for (int i = 0; i < static_cast<int>(raw.size()); ++i)
        for (const auto& t : raw[static_cast<std::size_t>(i)].tags) {
          if (t.clamp_id != c.id) continue;
          if (t.role == WaypointRole::CSide1) s1 = i;
          if (t.role == WaypointRole::CTip) tip = i;
          if (t.role == WaypointRole::CSide2) s2 = i;
        }
      CHECK(s1 < tip);
      CHECK(tip < s2);
    }

    // Force targets by role.
    for (const auto& w : merged) {
      CHECK((w.f_d == 7.0 || w.f_d == 10.0));
      const bool any_u = w.has_role(WaypointRole::UPre) || w.has_role(WaypointRole::UInsert);
      CHECK(w.f_d == (any_u ? 10.0 : 7.0));
    }

    // No consecutive pair left within the merge radius of its mean.
    for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
      const Pose2D m = 0.5 * (merged[i].position + merged[i + 1].position);
      CHECK(distance(merged[i].position, m) > kMergeRadius);
    }

    // Tags survive in order; clamp sequence order is preserved.
    std::vector<WaypointTag> raw_tags, merged_tags;
    for (const auto& w : raw) raw_tags.insert(raw_tags.end(), w.tags.begin(), w.tags.end());
    for (const auto& w : merged) merged_tags.insert(merged_tags.end(), w.tags.begin(), w.tags.end());
    CHECK(raw_tags == merged_tags);

    // Idempotent.
    const auto again = merge_waypoints(merged);
    REQUIRE(again.size() == merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
      CHECK(again[i].position == merged[i].position);
      CHECK(again[i].tags == merged[i].tags);
      CHECK(again[i].f_d == merged[i].f_d);
    }
  }
}

}
