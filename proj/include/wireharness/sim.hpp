#pragma once

// Quasi-static planar wire/gripper simulator.
//
// The wire runs straight from the fix-point to the gripper. It is slack while
// the anchor-to-gripper distance is at most the rest length and behaves as a
// linear spring beyond it. The grip holds at most a capstan-style friction
// limit f0 * exp(mu * |phi|); any excess tension slips wire through the
// fingers, lengthening the free rest length. Increasing |phi| winds wire onto
// the finger and shortens the free length by wrap_radius per radian.

#include <cstdint>
#include <vector>

#include "wireharness/core.hpp"

namespace wireharness::sim {

struct SimParams {
  double k_wire = 0.2;                     // N/mm
  double f0 = 4.0;                         // N, grip cap with no twist
  double mu = std::log(3.0) / kPi;         // 1/rad
  double noise_sigma = 0.05;               // N
  double dt = kControlPeriod;              // s
  double wrap_radius = 20.0;               // mm of free length wound per rad of |phi|

  /// Throws ConfigError when a parameter is non-positive (noise and wrap radius may be zero).
  void validate() const;
};

struct SimState {
  Pose2D gripper;          // world
  double theta = 0.0;      // rad, unwrapped gripper yaw
  TwistAngle phi;
  Pose2D fixpoint;         // world
  double rest_length = 1.0;  // mm of unstretched wire beyond the fix-point; negative once a switch
                             // carries more stretch across the clamp than the new span holds
  std::uint64_t rng_seed = 0;
  double cumulative_slip = 0.0;  // mm of wire slipped through the grip so far
};

double capstan_limit(TwistAngle phi, const SimParams& params);

/// Noise-free tension of the current configuration.
double tension(const SimState& state, const SimParams& params);

struct StepResult {
  SimState state;
  WireState observation;
  double slip = 0.0;  // mm slipped during this step
};

/// Measures the current state in its fix-point frame, consuming one noise draw.
StepResult observe(const SimState& state, const SimParams& params);

/// Executes one command for one control period. Throws BoundsError when `u` is outside the box.
StepResult step(const SimState& state, const ControlCommand& u, const SimParams& params);

/// Re-anchors the wire at `anchor` (a clamp that captured it). Tension and twist are preserved:
/// the rest length drops by the change in span, so the stretch carries over unchanged.
SimState switch_fixpoint(const SimState& state, Pose2D anchor);

/// Scripted alternating stretch/twist motions from randomized initial configurations.
std::vector<Trajectory> scripted_collect(int n_trajectories, int horizon, std::uint64_t seed,
                                         const SimParams& params);

}  // namespace wireharness::sim
