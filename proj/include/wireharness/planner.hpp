#pragma once

// Clamp-centric waypoint planning.
//
// Each clamp contributes a fixed pattern of waypoints: a U-clamp gets an
// approach waypoint and an insertion waypoint across its mouth; a C-clamp
// gets a side, tip, side sequence that wraps the wire around its tip.
// Consecutive waypoints that sit within 20 mm of their mean are then merged.

#include <string>
#include <vector>

#include "wireharness/core.hpp"

namespace wireharness::planner {

enum class ClampKind { C, U };

/// Waypoint offsets, mm.
struct ClampGeometry {
  double side_offset = 25.0;      // C: lateral distance of each side waypoint from the center
  double tip_offset = 25.0;       // C: distance of the tip waypoint beyond the center along the tip direction
  double u_pre_offset = 20.0;     // U: approach waypoint, this far before the mouth along the slot axis
  double u_insert_offset = 30.0;  // U: insertion waypoint, this far past the mouth along the slot axis
};

struct ClampSpec {
  std::string id;
  ClampKind kind = ClampKind::C;
  Pose2D center;
  double orientation = 0.0;  // rad; tip direction for C, slot axis for U
  ClampGeometry geometry;
};

enum class WaypointRole { CSide1, CTip, CSide2, UPre, UInsert };

struct WaypointTag {
  WaypointRole role;
  std::string clamp_id;
  friend bool operator==(const WaypointTag&, const WaypointTag&) = default;
};

struct Waypoint {
  Pose2D position;  // world
  double f_d = 0.0; // N
  std::vector<WaypointTag> tags;  // more than one after merging

  bool has_role(WaypointRole role) const;
};

inline constexpr double kCClampForce = 7.0;
inline constexpr double kUClampForce = 10.0;
inline constexpr double kMergeRadius = 20.0;

std::string to_string(ClampKind kind);
std::string to_string(WaypointRole role);
/// Throws ConfigError for anything other than "C" or "U".
ClampKind clamp_kind_from_string(const std::string& s);

/// Pre-merge waypoints of a single clamp, ordered for travel from `approach_from`.
std::vector<Waypoint> clamp_waypoints(const ClampSpec& clamp, Pose2D approach_from);

/// Greedy consecutive merge, repeated until no consecutive pair lies within kMergeRadius of its mean.
std::vector<Waypoint> merge_waypoints(std::vector<Waypoint> waypoints);

/// Clamp waypoints in sequence (each approached from the previous waypoint), then merged.
/// Throws ConfigError on an empty board.
std::vector<Waypoint> plan(const std::vector<ClampSpec>& board, Pose2D start);

/// Unmerged concatenation used by plan().
std::vector<Waypoint> plan_unmerged(const std::vector<ClampSpec>& board, Pose2D start);

}  // namespace wireharness::planner
