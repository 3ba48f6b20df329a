#include "wireharness/planner.hpp"

#include <algorithm>

#include "wireharness/errors.hpp"

namespace wireharness::planner {

namespace {

Waypoint make(Pose2D p, double f_d, WaypointRole role, const std::string& id) {
  return {p, f_d, {{role, id}}};
}

// true if a should be visited before b from `from`
bool nearer_first(Pose2D a, Pose2D b, Pose2D from) {
  const double da = distance(a, from);
  const double db = distance(b, from);
  if (da != db) return da < db;
  if (a.x != b.x) return a.x < b.x;
  return a.y <= b.y;
}

Pose2D mean_of(const std::vector<Waypoint>& wps, std::size_t first, std::size_t last) {
  Pose2D sum;
  for (std::size_t k = first; k < last; ++k) sum = sum + wps[k].position;
  return (1.0 / static_cast<double>(last - first)) * sum;
}

bool all_within(const std::vector<Waypoint>& wps, std::size_t first, std::size_t last, Pose2D m) {
  for (std::size_t k = first; k < last; ++k)
    if (distance(wps[k].position, m) > kMergeRadius) return false;
  return true;
}

std::vector<Waypoint> merge_pass(const std::vector<Waypoint>& wps) {
  std::vector<Waypoint> out;
  std::size_t i = 0;
  while (i < wps.size()) {
    std::size_t end = i + 1;
    while (end < wps.size() && all_within(wps, i, end + 1, mean_of(wps, i, end + 1))) ++end;
    Waypoint merged = wps[i];
    if (end - i > 1) {
      merged.position = mean_of(wps, i, end);
      for (std::size_t k = i + 1; k < end; ++k) {
        merged.f_d = std::max(merged.f_d, wps[k].f_d);
        merged.tags.insert(merged.tags.end(), wps[k].tags.begin(), wps[k].tags.end());
      }
    }
    out.push_back(std::move(merged));
    i = end;
  }
  return out;
}

}  // namespace

bool Waypoint::has_role(WaypointRole role) const {
  return std::any_of(tags.begin(), tags.end(), [role](const WaypointTag& t) { return t.role == role; });
}

std::string to_string(ClampKind kind) { return kind == ClampKind::C ? "C" : "U"; }

std::string to_string(WaypointRole role) {
  switch (role) {
    case WaypointRole::CSide1: return "C_side_1";
    case WaypointRole::CTip: return "C_tip";
    case WaypointRole::CSide2: return "C_side_2";
    case WaypointRole::UPre: return "U_pre";
    case WaypointRole::UInsert: return "U_insert";
  }
  return "unknown";
}

ClampKind clamp_kind_from_string(const std::string& s) {
  if (s == "C") return ClampKind::C;
  if (s == "U") return ClampKind::U;
  throw ConfigError("unknown clamp kind '" + s + "'");
}

std::vector<Waypoint> clamp_waypoints(const ClampSpec& clamp, Pose2D approach_from) {
  const Pose2D axis{std::cos(clamp.orientation), std::sin(clamp.orientation)};
  const ClampGeometry& g = clamp.geometry;
  switch (clamp.kind) {
    case ClampKind::C: {
      const Pose2D normal{-axis.y, axis.x};
      Pose2D first = clamp.center + g.side_offset * normal;
      Pose2D second = clamp.center - g.side_offset * normal;
      if (!nearer_first(first, second, approach_from)) std::swap(first, second);
      return {make(first, kCClampForce, WaypointRole::CSide1, clamp.id),
              make(clamp.center + g.tip_offset * axis, kCClampForce, WaypointRole::CTip, clamp.id),
              make(second, kCClampForce, WaypointRole::CSide2, clamp.id)};
    }
    case ClampKind::U: {
      // Travel along the slot axis in the direction that leads away from the approach point.
      const Pose2D a = dot(clamp.center - approach_from, axis) < 0.0 ? -1.0 * axis : axis;
      return {make(clamp.center - g.u_pre_offset * a, kUClampForce, WaypointRole::UPre, clamp.id),
              make(clamp.center + g.u_insert_offset * a, kUClampForce, WaypointRole::UInsert, clamp.id)};
    }
  }
  throw ConfigError("unknown clamp kind for clamp '" + clamp.id + "'");
}

std::vector<Waypoint> merge_waypoints(std::vector<Waypoint> waypoints) {
  for (;;) {
    std::vector<Waypoint> next = merge_pass(waypoints);
    if (next.size() == waypoints.size()) return next;
    waypoints = std::move(next);
  }
}

std::vector<Waypoint> plan_unmerged(const std::vector<ClampSpec>& board, Pose2D start) {
  if (board.empty()) throw ConfigError("cannot plan an empty clamp sequence");
  std::vector<Waypoint> out;
  Pose2D current = start;
  for (const auto& clamp : board) {
    auto wps = clamp_waypoints(clamp, current);
    current = wps.back().position;
    out.insert(out.end(), wps.begin(), wps.end());
  }
  return out;
}

std::vector<Waypoint> plan(const std::vector<ClampSpec>& board, Pose2D start) {
  return merge_waypoints(plan_unmerged(board, start));
}

}  // namespace wireharness::planner
