#pragma once

// Receding-horizon tension/position controller in lift space, plus the two
// experimental baselines (no-twist PI stretching and linear raw-state dynamics).
//
// The horizon problem
//   min  sum_t (g_t - g_d)^T Q (g_t - g_d) + u_t^T R u_t
//   s.t. g_{t+1} = K g_t + L u_t,  c_l <= u_t <= c_u
// is condensed by substituting the rollout, leaving a box-constrained problem in
// the stacked controls. State bounds b_l <= A g_t <= b_u (A selects x, y, theta, f)
// enter as a quadratic penalty. Position entries are weighted in millimeters by
// default; `position_scale` rescales them (1e-3 evaluates the cost in meters).

#include <span>
#include <vector>

#include <Eigen/Core>

#include "wireharness/core.hpp"
#include "wireharness/koopman.hpp"

namespace wireharness::mpc {

struct MpcConfig {
  int horizon = 10;
  Eigen::VectorXd q_diag = default_q();                    // weights on lifted entries
  Eigen::Vector3d r_diag{0.1, 0.1, 0.1};                   // weights on (dx, dy, dtheta)
  Eigen::Vector4d state_lower{-400.0, -400.0, -kPi, 0.0};  // on (x, y, theta, f)
  Eigen::Vector4d state_upper{400.0, 400.0, kPi, 15.0};
  Eigen::Vector3d control_lower{-kMaxTranslationStep, -kMaxTranslationStep, -kMaxRotationStep};
  Eigen::Vector3d control_upper{kMaxTranslationStep, kMaxTranslationStep, kMaxRotationStep};
  double state_penalty = 1e3;
  double position_scale = 1.0;  // cost length unit per millimeter
  double tolerance = 1e-6;
  int max_iterations = 5000;

  /// diag(10, 10, 0, 1, 0, ..., 0) over the 20 lifted entries.
  static Eigen::VectorXd default_q();
  /// Throws ConfigError on an invalid field.
  void validate() const;
};

struct TrackingTarget {
  double x_d = 0.0;  // mm, fix-point frame
  double y_d = 0.0;  // mm
  double f_d = 0.0;  // N
};

struct MpcSolution {
  ControlCommand command;
  std::vector<ControlCommand> plan;      // all horizon controls
  double objective = 0.0;
  double residual = 0.0;                 // projected-gradient norm at exit
  int iterations = 0;
  bool converged = true;
  std::vector<double> objective_history; // accepted objective after each iteration
};

/// Effective diagonal weights after unit scaling, for a model with `lift_dim` entries.
Eigen::VectorXd effective_q(const MpcConfig& cfg, int lift_dim);
Eigen::Vector3d effective_r(const MpcConfig& cfg);

/// Full solve. Throws BoundsError if the initial state violates the state bounds and
/// SolverError (carrying the last residual) when max_iterations is exhausted.
MpcSolution solve_detailed(const koopman::KoopmanModel& model, const WireState& state, TwistAngle twist,
                           const TrackingTarget& target, const MpcConfig& cfg);

/// As solve_detailed, but returns the last iterate with converged = false instead of throwing
/// when the iteration budget runs out. Still throws BoundsError.
MpcSolution solve_best_effort(const koopman::KoopmanModel& model, const WireState& state, TwistAngle twist,
                              const TrackingTarget& target, const MpcConfig& cfg);

/// Objective of a candidate control plan (same units as MpcSolution::objective).
double plan_objective(const koopman::KoopmanModel& model, const WireState& state, TwistAngle twist,
                      const TrackingTarget& target, const MpcConfig& cfg,
                      std::span<const ControlCommand> plan);

inline ControlCommand solve(const koopman::KoopmanModel& model, const WireState& state, TwistAngle twist,
                            const TrackingTarget& target, const MpcConfig& cfg) {
  return solve_detailed(model, state, twist, target, cfg).command;
}

struct PiGains {
  double kp = 1.0;              // mm per N per step
  double ki = 0.25;             // mm per N per step
  double integral_clamp = 20.0; // mm, bound on ki * integral
};

/// No-twist baseline. Stretches along the fix-point -> target ray with a PI action on the
/// tension error, on top of a proportional pull toward the target position. Never rotates.
class NoTwistPi {
 public:
  explicit NoTwistPi(PiGains gains = {}) : gains_(gains) {}

  ControlCommand operator()(const WireState& state, const TrackingTarget& target);
  void reset() { integral_ = 0.0; }
  double integral() const { return integral_; }

 private:
  PiGains gains_;
  double integral_ = 0.0;  // accumulated tension error, N * steps
};

struct LinearDynamics {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 3> B;

  /// Wraps (A, B) as a raw-lift model so the MPC can use it unchanged.
  koopman::KoopmanModel as_model() const;
};

/// Least-squares fit of s_{t+1} = A s_t + B u_t over the raw state. Throws FitError on empty data.
LinearDynamics fit_linear_baseline(std::span<const Trajectory> trajs);

}  // namespace wireharness::mpc
