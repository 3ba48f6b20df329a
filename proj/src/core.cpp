#include "wireharness/core.hpp"

#include <algorithm>

#include "wireharness/errors.hpp"

namespace wireharness {

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

bool ControlCommand::within_bounds() const {
  return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dtheta) &&
         std::abs(dx) <= kMaxTranslationStep && std::abs(dy) <= kMaxTranslationStep &&
         std::abs(dtheta) <= kMaxRotationStep;
}

ControlCommand clamp_to_bounds(const ControlCommand& u) {
  return {std::clamp(u.dx, -kMaxTranslationStep, kMaxTranslationStep),
          std::clamp(u.dy, -kMaxTranslationStep, kMaxTranslationStep),
          std::clamp(u.dtheta, -kMaxRotationStep, kMaxRotationStep)};
}

Pose2D world_to_fixpoint(const FixPointFrame& frame, Pose2D world_pose) {
  return world_pose - frame.origin;
}

Pose2D fixpoint_to_world(const FixPointFrame& frame, Pose2D local) {
  return local + frame.origin;
}

const std::array<std::pair<int, int>, kLiftDim - kLiftBaseDim>& monomial_pairs() {
  static const auto pairs = [] {
    std::array<std::pair<int, int>, kLiftDim - kLiftBaseDim> out{};
    std::size_t k = 0;
    for (int i = 0; i < kLiftBaseDim; ++i)
      for (int j = i; j < kLiftBaseDim; ++j) out[k++] = {i, j};
    return out;
  }();
  return pairs;
}

int monomial_index(int i, int j) {
  if (i > j) std::swap(i, j);
  // entries before row i of the upper triangle: sum_{r<i} (5 - r)
  const int before = i * kLiftBaseDim - i * (i - 1) / 2;
  return kLiftBaseDim + before + (j - i);
}

LiftedState lift(const WireState& state, TwistAngle twist) {
  LiftedState g;
  g << state.x, state.y, state.theta, state.f, twist.phi, Eigen::Matrix<double, 15, 1>::Zero();
  int k = kLiftBaseDim;
  for (const auto& [i, j] : monomial_pairs()) g[k++] = g[i] * g[j];
  return g;
}

void Trajectory::validate() const {
  if (states.size() < 2) throw ConfigError("trajectory needs at least 2 states");
  if (twists.size() != states.size())
    throw ConfigError("trajectory twist count does not match state count");
  if (controls.size() + 1 != states.size())
    throw ConfigError("trajectory must have exactly one fewer control than states");
  for (const auto& u : controls)
    if (!u.within_bounds()) throw ConfigError("trajectory control outside command bounds");
}

}  // namespace wireharness
