#include "wireharness/sim.hpp"

#include <algorithm>
#include <random>

#include "wireharness/errors.hpp"

namespace wireharness::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double unit_uniform(std::uint64_t& s) {
  // 53 random mantissa bits in (0, 1].
  return (static_cast<double>(splitmix64(s) >> 11) + 1.0) * 0x1.0p-53;
}

// Box-Muller; written out so noise sequences are identical across standard libraries.
double standard_normal(std::uint64_t& s) {
  const double u1 = unit_uniform(s);
  const double u2 = unit_uniform(s);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double bearing(Pose2D from, Pose2D to) {
  const Pose2D d = to - from;
  return std::atan2(d.y, d.x);
}

}  // namespace

void SimParams::validate() const {
  if (!(k_wire > 0.0) || !(f0 > 0.0) || !(mu > 0.0) || !(dt > 0.0))
    throw ConfigError("sim parameters k_wire, f0, mu, dt must be positive");
  if (!(noise_sigma >= 0.0) || !(wrap_radius >= 0.0))
    throw ConfigError("sim parameters noise_sigma, wrap_radius must be non-negative");
}

double capstan_limit(TwistAngle phi, const SimParams& params) {
  return params.f0 * std::exp(params.mu * std::abs(phi.phi));
}

double tension(const SimState& state, const SimParams& params) {
  const double d = distance(state.gripper, state.fixpoint);
  if (d <= state.rest_length) return 0.0;
  return std::min(params.k_wire * (d - state.rest_length), capstan_limit(state.phi, params));
}

StepResult observe(const SimState& state, const SimParams& params) {
  StepResult out{state, {}, 0.0};
  const Pose2D local = state.gripper - state.fixpoint;
  const double f = tension(state, params);
  const double noise = standard_normal(out.state.rng_seed) * params.noise_sigma;
  out.observation = {local.x, local.y, wrap_angle(state.theta), f > 0.0 ? std::max(0.0, f + noise) : 0.0};
  return out;
}

StepResult step(const SimState& state, const ControlCommand& u, const SimParams& params) {
  if (!u.within_bounds()) throw BoundsError("control command outside the per-step bounds");

  SimState next = state;
  const bool had_bearing = distance(state.gripper, state.fixpoint) > 0.0;
  const double bearing_before = bearing(state.fixpoint, state.gripper);

  next.gripper = state.gripper + Pose2D{u.dx, u.dy};
  next.theta = state.theta + u.dtheta;

  double d_bearing = 0.0;
  if (had_bearing && distance(next.gripper, next.fixpoint) > 0.0)
    d_bearing = wrap_angle(bearing(next.fixpoint, next.gripper) - bearing_before);
  next.phi.phi = state.phi.phi + u.dtheta - d_bearing;

  // Winding onto / unwinding from the finger.
  next.rest_length -= params.wrap_radius * (std::abs(next.phi.phi) - std::abs(state.phi.phi));

  double slip = 0.0;
  const double d = distance(next.gripper, next.fixpoint);
  const double cap = capstan_limit(next.phi, params);
  if (params.k_wire * (d - next.rest_length) > cap) {
    slip = d - cap / params.k_wire - next.rest_length;
    next.rest_length += slip;
    next.cumulative_slip += slip;
  }

  StepResult out = observe(next, params);
  out.slip = slip;
  return out;
}

SimState switch_fixpoint(const SimState& state, Pose2D anchor) {
  SimState next = state;
  const double before = distance(state.gripper, state.fixpoint);
  const double after = distance(state.gripper, anchor);
  next.fixpoint = anchor;
  next.rest_length = state.rest_length - (before - after);
  return next;
}

std::vector<Trajectory> scripted_collect(int n_trajectories, int horizon, std::uint64_t seed,
                                         const SimParams& params) {
  if (n_trajectories < 1) throw ConfigError("scripted_collect needs at least one trajectory");
  if (horizon < 1) throw ConfigError("scripted_collect needs a horizon of at least one step");
  params.validate();

  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n_trajectories));
  for (int i = 0; i < n_trajectories; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    auto uniform = [&rng](double lo, double hi) {
      return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    SimState s;
    const double b0 = uniform(-kPi, kPi);
    const double r0 = uniform(120.0, 320.0);
    s.gripper = {r0 * std::cos(b0), r0 * std::sin(b0)};
    s.rest_length = r0 + uniform(-30.0, 30.0);
    s.theta = uniform(-kPi, kPi);
    s.phi.phi = uniform(0.0, 3.0);
    s.rng_seed = rng();

    Trajectory traj;
    auto first = observe(s, params);
    s = first.state;
    traj.states.push_back(first.observation);
    traj.twists.push_back(s.phi);

    bool stretching = uniform(0.0, 1.0) < 0.5;
    int remaining = 0;
    double radial_rate = 0.0;
    double twist_rate = 0.0;
    for (int t = 0; t < horizon; ++t) {
      if (remaining == 0) {
        stretching = !stretching;
        remaining = std::uniform_int_distribution<int>(4, 10)(rng);
        radial_rate = stretching ? uniform(-6.0, 10.0) : uniform(-1.5, 1.5);
        twist_rate = stretching ? uniform(-0.3, 0.3) : uniform(-1.5, 3.0);
        twist_rate *= kPi / 180.0;
      }
      --remaining;

      const Pose2D rel = s.gripper - s.fixpoint;
      const double r = std::max(rel.norm(), 1e-9);
      const Pose2D radial{rel.x / r, rel.y / r};
      const Pose2D lateral{-radial.y, radial.x};
      double rate = radial_rate;
      if (r > 420.0) rate = -std::abs(rate);
      if (r < 80.0) rate = std::abs(rate);
      const double side = uniform(-2.0, 2.0);
      double dtheta = twist_rate + uniform(-0.2, 0.2) * kPi / 180.0;
      if (s.phi.phi > 3.5) dtheta = -std::abs(dtheta);
      if (s.phi.phi < -0.2) dtheta = std::abs(dtheta);

      const ControlCommand u = clamp_to_bounds(
          {rate * radial.x + side * lateral.x, rate * radial.y + side * lateral.y, dtheta});
      auto res = step(s, u, params);
      s = res.state;
      traj.controls.push_back(u);
      traj.states.push_back(res.observation);
      traj.twists.push_back(s.phi);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace wireharness::sim
