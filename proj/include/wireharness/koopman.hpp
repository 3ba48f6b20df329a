#pragma once

// Lift-space system identification (EDMD with control).
//
// A model advances a lifted observable vector linearly:
//   g_{t+1} = K g_t + L u_t
// and is fitted in closed form as [K, L] = P G^+ from one-step transition pairs.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wireharness/core.hpp"

namespace wireharness::koopman {

/// Observable dictionary used by a model.
enum class LiftKind {
  Poly2,  // the 20-dimensional degree-2 polynomial lift of (x, y, theta, f, phi)
  Raw,    // the raw state (x, y, theta, f); used by the linear-dynamics baseline
};

int lift_dim(LiftKind kind);
std::string lift_spec(LiftKind kind);
/// Throws ConfigError for an unknown identifier.
LiftKind lift_kind_from_spec(const std::string& spec);
Eigen::VectorXd lift_state(LiftKind kind, const WireState& state, TwistAngle twist);

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t source_trajectories = 0;
  std::size_t augmentation_factor = 1;
  std::size_t transitions = 0;
};

struct KoopmanModel {
  Eigen::MatrixXd K;  // n x n
  Eigen::MatrixXd L;  // n x 3
  LiftKind lift = LiftKind::Poly2;
  Provenance provenance;

  int dim() const { return static_cast<int>(K.rows()); }
  /// Throws ConfigError on shape mismatch or non-finite entries.
  void validate() const;
};

/// Rotation angles used for geometric augmentation: -pi + k*pi/5, k = 0..9.
std::vector<double> augmentation_angles();

/// Rotates positions and translations about the fix-point by `psi` and shifts theta;
/// tension, twist and dtheta are untouched.
Trajectory augment(const Trajectory& traj, double psi);

/// Every trajectory at every augmentation angle (10x the input).
std::vector<Trajectory> augment_dataset(std::span<const Trajectory> trajs);

/// Accumulated second-moment matrices of the one-step regression.
struct NormalEquations {
  Eigen::MatrixXd P;  // n x (n + 3): mean of g(s_{i+1}) g'(s_i)^T
  Eigen::MatrixXd G;  // (n + 3) x (n + 3): mean of g'(s_i) g'(s_i)^T
  std::size_t transitions = 0;
};

/// Transitions never cross trajectory boundaries. Throws FitError on empty or non-finite data.
NormalEquations accumulate(std::span<const Trajectory> trajs, LiftKind kind);

/// Moore-Penrose pseudoinverse after symmetric diagonal equilibration, singular values
/// below rel_cutoff * sigma_max discarded.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& G, double rel_cutoff = 1e-10);

KoopmanModel fit(std::span<const Trajectory> trajs, LiftKind kind = LiftKind::Poly2);

/// Sum over transitions of || g(s_{i+1}) - [K, L] g'(s_i, u_i) ||^2.
double one_step_loss(const Eigen::MatrixXd& KL, std::span<const Trajectory> trajs, LiftKind kind);

Eigen::VectorXd predict_one_step(const KoopmanModel& model, const WireState& state, TwistAngle twist,
                                 const ControlCommand& u);

/// Lifts the initial state once and propagates linearly; returns controls.size() + 1 vectors.
std::vector<Eigen::VectorXd> predict_rollout(const KoopmanModel& model, const WireState& state,
                                             TwistAngle twist, std::span<const ControlCommand> controls);

}  // namespace wireharness::koopman
