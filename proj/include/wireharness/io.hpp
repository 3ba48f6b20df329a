#pragma once

// On-disk formats: trajectory CSV, model JSON and board layout JSON.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wireharness/core.hpp"
#include "wireharness/koopman.hpp"
#include "wireharness/planner.hpp"

namespace wireharness::io {

/// 64-bit FNV-1a digest as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& data);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

// Trajectory CSV: optional leading "# key: value" comment lines, a mandatory header
// "t,x,y,theta,f,phi,dx,dy,dtheta", one row per state. The final row leaves the
// three control columns empty.
inline constexpr const char* kTrajectoryHeader = "t,x,y,theta,f,phi,dx,dy,dtheta";

std::string trajectory_to_csv(const Trajectory& traj, const std::string& config_hash = "");
/// Throws ParseError naming `source` and the offending line.
Trajectory trajectory_from_csv(const std::string& text, const std::string& source);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string model_to_json(const koopman::KoopmanModel& model, const std::string& config_hash = "");
koopman::KoopmanModel model_from_json(const std::string& text, const std::string& source);

struct Route {
  std::string name;
  std::vector<std::string> sequence;  // clamp ids
};

struct BoardLayout {
  Pose2D connector;
  Pose2D grasp;               // initial gripper position, world
  double grasp_rest_length = 0.0;  // free wire length from connector to grasp, mm
  double clamp_radius = 6.0;  // footprint used by the tangle check, mm
  std::vector<planner::ClampSpec> clamps;
  std::vector<Route> routes;

  /// Clamp specs of a route in sequence order. Throws ConfigError on unknown ids or route names.
  std::vector<planner::ClampSpec> route_clamps(const std::string& route_name) const;
  const planner::ClampSpec& clamp(const std::string& id) const;
};

BoardLayout board_from_json(const std::string& text, const std::string& source);
std::string board_to_json(const BoardLayout& board);

}  // namespace wireharness::io
