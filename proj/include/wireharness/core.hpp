#pragma once

// Shared domain types for the wire-harnessing stack.
//
// Units are millimeters, radians and newtons throughout. Positions expressed
// "in the fix-point frame" are relative to the current wire anchor; that frame
// is a pure translation of the world frame.

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace wireharness {

inline constexpr double kPi = std::numbers::pi;

/// Duration of one control command in seconds.
inline constexpr double kControlPeriod = 0.5;

/// Per-step translation cap in mm (0.1 m/s over one control period).
inline constexpr double kMaxTranslationStep = 50.0;

/// Per-step rotation cap in rad (6 deg/s over one control period).
inline constexpr double kMaxRotationStep = 3.0 * kPi / 180.0;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

struct Pose2D {
  double x = 0.0;
  double y = 0.0;

  double norm() const { return std::hypot(x, y); }
  friend Pose2D operator+(Pose2D a, Pose2D b) { return {a.x + b.x, a.y + b.y}; }
  friend Pose2D operator-(Pose2D a, Pose2D b) { return {a.x - b.x, a.y - b.y}; }
  friend Pose2D operator*(double s, Pose2D a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

inline double distance(Pose2D a, Pose2D b) { return (a - b).norm(); }

/// z-component of the planar cross product a x b.
inline double cross(Pose2D a, Pose2D b) { return a.x * b.y - a.y * b.x; }

inline double dot(Pose2D a, Pose2D b) { return a.x * b.x + a.y * b.y; }

/// Relative twist between the wire direction and the gripper. May exceed one turn.
struct TwistAngle {
  double phi = 0.0;
  friend bool operator==(const TwistAngle&, const TwistAngle&) = default;
};

/// Observed wire state in the fix-point frame.
struct WireState {
  double x = 0.0;      // mm
  double y = 0.0;      // mm
  double theta = 0.0;  // rad, gripper yaw, wrapped to (-pi, pi]
  double f = 0.0;      // N, tension magnitude

  Pose2D position() const { return {x, y}; }
  friend bool operator==(const WireState&, const WireState&) = default;
};

/// Incremental motion executed over one control period.
struct ControlCommand {
  double dx = 0.0;      // mm
  double dy = 0.0;      // mm
  double dtheta = 0.0;  // rad

  bool within_bounds() const;
  Eigen::Vector3d vec() const { return {dx, dy, dtheta}; }
  static ControlCommand from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
  friend bool operator==(const ControlCommand&, const ControlCommand&) = default;
};

/// Clamps each component of `u` into the command box.
ControlCommand clamp_to_bounds(const ControlCommand& u);

struct FixPointFrame {
  Pose2D origin;
};

Pose2D world_to_fixpoint(const FixPointFrame& frame, Pose2D world_pose);
Pose2D fixpoint_to_world(const FixPointFrame& frame, Pose2D local);

// Lift layout: (x, y, theta, f, phi) followed by the 15 degree-2 monomials
// g[i]*g[j] for 0 <= i <= j < 5, enumerated row-major over the upper triangle:
// xx xy xtheta xf xphi yy ytheta yf yphi thetatheta thetaf thetaphi ff fphi phiphi.
inline constexpr int kLiftBaseDim = 5;
inline constexpr int kLiftDim = 20;
inline constexpr const char* kPoly2LiftSpec = "poly2-upper-rowmajor(x,y,theta,f,phi)";

using LiftedState = Eigen::Matrix<double, kLiftDim, 1>;

/// Source index pairs of the monomial entries, in lift order (entry 5 + k).
const std::array<std::pair<int, int>, kLiftDim - kLiftBaseDim>& monomial_pairs();

/// Lift index of the monomial g[i]*g[j] (order of i, j irrelevant).
int monomial_index(int i, int j);

LiftedState lift(const WireState& state, TwistAngle twist);

/// One recorded run: states.size() == controls.size() + 1.
struct Trajectory {
  std::vector<WireState> states;
  std::vector<TwistAngle> twists;
  std::vector<ControlCommand> controls;

  std::size_t transitions() const { return controls.size(); }
  /// Throws ConfigError if lengths mismatch, fewer than 2 states, or a control is out of bounds.
  void validate() const;
};

}  // namespace wireharness
