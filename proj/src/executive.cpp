#include "wireharness/executive.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <sstream>

#include <json.hpp>

#include "wireharness/errors.hpp"

namespace wireharness::executive {

namespace {

using io::format_double;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

WireState local_observation(const sim::SimState& s, const WireState& measured) {
  const Pose2D local = s.gripper - s.fixpoint;
  return {local.x, local.y, measured.theta, measured.f};
}

Pose2D unit_axis(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Clamp currently targeted by a waypoint, if any is still unrouted.
const planner::WaypointTag* active_tag(const planner::Waypoint& wp, const std::set<std::string>& captured) {
  for (const auto& tag : wp.tags)
    if (!captured.count(tag.clamp_id)) return &tag;
  return nullptr;
}

}  // namespace

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::KoopmanMpc: return "koopman_mpc";
    case ControllerKind::LinearMpc: return "linear_mpc";
    case ControllerKind::PiNoTwist: return "pi_no_twist";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string& name) {
  if (name == "koopman_mpc") return ControllerKind::KoopmanMpc;
  if (name == "linear_mpc") return ControllerKind::LinearMpc;
  if (name == "pi_no_twist") return ControllerKind::PiNoTwist;
  throw ConfigError("unknown controller '" + name + "' (expected koopman_mpc, linear_mpc or pi_no_twist)");
}

Controller::Controller(ControllerKind kind, koopman::KoopmanModel model, mpc::MpcConfig cfg, mpc::PiGains gains)
    : kind_(kind), model_(std::move(model)), cfg_(std::move(cfg)), pi_(gains) {
  cfg_.validate();
  if (kind_ != ControllerKind::PiNoTwist) {
    model_.validate();
    const auto expected = kind_ == ControllerKind::KoopmanMpc ? koopman::LiftKind::Poly2 : koopman::LiftKind::Raw;
    if (model_.lift != expected)
      throw ConfigError(to_string(kind_) + " needs a model with lift " + koopman::lift_spec(expected));
  }
}

ControlCommand Controller::command(const WireState& state, TwistAngle twist, const mpc::TrackingTarget& target) {
  if (kind_ == ControllerKind::PiNoTwist) return pi_(state, target);
  ++solves_;
  const auto t0 = std::chrono::steady_clock::now();
  ControlCommand u{};
  try {
    const mpc::MpcSolution sol = mpc::solve_best_effort(model_, state, twist, target, cfg_);
    if (!sol.converged) ++nonconverged_;
    u = clamp_to_bounds(sol.command);
  } catch (const BoundsError&) {
    // Measured state outside the box: plan from its projection onto the box instead.
    ++out_of_bounds_;
    WireState clipped = state;
    clipped.x = std::clamp(state.x, cfg_.state_lower[0], cfg_.state_upper[0]);
    clipped.y = std::clamp(state.y, cfg_.state_lower[1], cfg_.state_upper[1]);
    clipped.theta = std::clamp(state.theta, cfg_.state_lower[2], cfg_.state_upper[2]);
    clipped.f = std::clamp(state.f, cfg_.state_lower[3], cfg_.state_upper[3]);
    const mpc::MpcSolution sol = mpc::solve_best_effort(model_, clipped, twist, target, cfg_);
    if (!sol.converged) ++nonconverged_;
    u = clamp_to_bounds(sol.command);
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  max_solve_seconds_ = std::max(max_solve_seconds_, dt);
  total_solve_seconds_ += dt;
  return u;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Following: return "following";
    case Phase::Primitive: return "primitive";
    case Phase::Done: return "done";
    case Phase::Failed: return "failed";
  }
  return "unknown";
}

std::string to_string(FailureMode m) {
  switch (m) {
    case FailureMode::None: return "none";
    case FailureMode::A: return "A";
    case FailureMode::B: return "B";
    case FailureMode::C: return "C";
    case FailureMode::D: return "D";
  }
  return "unknown";
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    case Outcome::Timeout: return "timeout";
  }
  return "unknown";
}

int cross_sign(Pose2D O, Pose2D E, Pose2D C) {
  const double z = cross(E - O, C - E);
  return (z > 0.0) - (z < 0.0);
}

bool should_switch_fixpoint(const EpisodeState& episode, Pose2D O, Pose2D E, Pose2D C, planner::ClampKind kind) {
  if (kind == planner::ClampKind::U) return episode.insertion_done;
  if (!(distance(E, O) > distance(C, O))) return false;
  const int s = cross_sign(O, E, C);
  return s != 0 && episode.prev_cross_sign != 0 && s != episode.prev_cross_sign;
}

void record_cross_sign(EpisodeState& episode, int sign) {
  if (sign != 0) episode.prev_cross_sign = sign;
}

PrimitiveScript primitive_script(PrimitiveKind kind) {
  using K = PrimitiveStep::Kind;
  switch (kind) {
    case PrimitiveKind::CFirstSide: return {{{K::Descend, kPrimitiveDepth}}, false};
    case PrimitiveKind::CSecondSide: return {{{K::Ascend, kPrimitiveDepth}}, false};
    case PrimitiveKind::UInsert:
      return {{{K::Descend, kPrimitiveDepth},
               {K::Lateral, kPrimitiveTraverse},
               {K::Lateral, -kPrimitiveTraverse},
               {K::Ascend, kPrimitiveDepth}},
              true};
  }
  throw ConfigError("unknown primitive");
}

std::string to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::CFirstSide: return "C_first_side";
    case PrimitiveKind::CSecondSide: return "C_second_side";
    case PrimitiveKind::UInsert: return "U_insert";
  }
  return "unknown";
}

std::string to_string(PrimitiveStep::Kind kind) {
  switch (kind) {
    case PrimitiveStep::Kind::Descend: return "descend";
    case PrimitiveStep::Kind::Ascend: return "ascend";
    case PrimitiveStep::Kind::Lateral: return "lateral";
    case PrimitiveStep::Kind::Dwell: return "dwell";
  }
  return "unknown";
}

double point_segment_distance(Pose2D p, Pose2D a, Pose2D b) {
  const Pose2D ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

void EpisodeContext::advance(const ControlCommand& u, double f_d, std::size_t waypoint_index,
                             const std::string& event) {
  const ControlCommand cmd = clamp_to_bounds(u);
  const sim::StepResult r = sim::step(sim, cmd, params);
  sim = r.state;
  observation = r.observation;
  ++step;
  log.push_back({step, sim.gripper, observation, sim.phi.phi, f_d, cmd, waypoint_index, event});
}

PrimitiveOutcome run_primitive(PrimitiveKind kind, EpisodeContext& ctx, Controller& controller,
                               const mpc::TrackingTarget& frozen_target, const planner::ClampSpec& clamp,
                               std::size_t waypoint_index) {
  PrimitiveOutcome out;
  const PrimitiveScript script = primitive_script(kind);
  const Pose2D edge = unit_axis(clamp.orientation);
  const std::string tag = to_string(kind) + ":";
  for (const PrimitiveStep& st : script.steps) {
    ControlCommand u{};
    if (st.kind == PrimitiveStep::Kind::Lateral) {
      u = {st.amount * edge.x, st.amount * edge.y, 0.0};
    } else if (st.kind != PrimitiveStep::Kind::Dwell) {
      // Z motion runs as one period while the controller keeps the tension.
      u = controller.command(local_observation(ctx.sim, ctx.observation), ctx.sim.phi, frozen_target);
    }
    ctx.advance(u, frozen_target.f_d, waypoint_index, tag + to_string(st.kind));
    ++out.steps;
    if (kind == PrimitiveKind::UInsert && st.kind == PrimitiveStep::Kind::Descend) {
      out.force_at_descend = ctx.observation.f;
      out.alignment = point_segment_distance(clamp.center, ctx.sim.fixpoint, ctx.sim.gripper);
      out.captured = out.force_at_descend >= kCaptureForce && out.alignment <= kCaptureAlignment;
      if (!out.captured) {
        out.failure = FailureMode::B;
        return out;
      }
    }
  }
  return out;
}

EpisodeReport run_episode(const io::BoardLayout& board, const std::vector<planner::ClampSpec>& route,
                          const std::vector<planner::Waypoint>& plan, Controller& controller,
                          const sim::SimParams& params, const EpisodeOptions& options) {
  params.validate();
  EpisodeReport report;
  if (route.empty()) {
    report.outcome = Outcome::Success;
    return report;
  }
  if (plan.empty()) throw ConfigError("non-empty route with an empty plan");

  std::mt19937_64 rng(mix_seed(options.seed, 1));
  std::uniform_real_distribution<double> jitter(-options.grasp_jitter, options.grasp_jitter);

  EpisodeContext ctx;
  ctx.params = params;
  ctx.sim.fixpoint = board.connector;
  ctx.sim.gripper = board.grasp + Pose2D{jitter(rng), jitter(rng)};
  ctx.sim.rest_length = board.grasp_rest_length + jitter(rng);
  ctx.sim.rng_seed = mix_seed(options.seed, 2);
  {
    const sim::StepResult first = sim::observe(ctx.sim, params);
    ctx.sim = first.state;
    ctx.observation = first.observation;
  }

  EpisodeState ep;
  ep.frame.origin = board.connector;
  controller.reset();
  const int nonconverged_before = controller.nonconverged();

  auto clamp_of = [&](const std::string& id) -> const planner::ClampSpec& {
    for (const auto& c : route)
      if (c.id == id) return c;
    return board.clamp(id);
  };

  auto finish = [&](Outcome o, FailureMode m, std::string detail) {
    report.outcome = o;
    report.failure = m;
    report.failure_detail = std::move(detail);
    ep.phase = o == Outcome::Success ? Phase::Done : Phase::Failed;
  };

  auto engage = [&](const planner::ClampSpec& c) {
    ctx.sim = sim::switch_fixpoint(ctx.sim, c.center);
    ep.frame.origin = c.center;
    ep.captured_clamps.insert(c.id);
    report.engaged_clamps.push_back(c.id);
    ep.prev_cross_sign = 0;
    ep.insertion_done = false;
    ctx.log.back().event += ctx.log.back().event.empty() ? "switch:" + c.id : ";switch:" + c.id;
  };

  // Per-step failure checks after the simulator has moved.
  auto adjudicate = [&]() -> bool {
    report.max_tension = std::max(report.max_tension, ctx.observation.f);
    if (ctx.sim.fixpoint == board.connector && ctx.observation.f > kConnectorLimit) {
      finish(Outcome::Failure, FailureMode::C, "connector pulled at " + format_double(ctx.observation.f) + " N");
      return true;
    }
    if (ctx.sim.cumulative_slip > kSlipBudget) {
      finish(Outcome::Failure, FailureMode::D, "wire slipped " + format_double(ctx.sim.cumulative_slip) + " mm");
      return true;
    }
    const planner::WaypointTag* tag =
        ep.waypoint_index < plan.size() ? active_tag(plan[ep.waypoint_index], ep.captured_clamps) : nullptr;
    for (const auto& c : board.clamps) {
      if (ep.captured_clamps.count(c.id) || (tag && tag->clamp_id == c.id)) continue;
      if (c.center == ctx.sim.fixpoint) continue;
      if (point_segment_distance(c.center, ctx.sim.fixpoint, ctx.sim.gripper) < board.clamp_radius) {
        finish(Outcome::Failure, FailureMode::A, "wire crosses clamp " + c.id);
        return true;
      }
    }
    return false;
  };

  int reach_count = 0;
  int steps_here = 0;
  std::string tracked_c;  // C-clamp whose crossing is being watched

  while (ep.phase != Phase::Done && ep.phase != Phase::Failed) {
    if (ctx.step >= options.max_steps) {
      finish(Outcome::Timeout, FailureMode::None, "step budget exhausted");
      break;
    }
    const planner::Waypoint& wp = plan[ep.waypoint_index];
    const Pose2D goal = world_to_fixpoint(ep.frame, wp.position);
    const mpc::TrackingTarget target{goal.x, goal.y, wp.f_d};

    const ControlCommand u = controller.command(local_observation(ctx.sim, ctx.observation), ctx.sim.phi, target);
    ctx.advance(u, wp.f_d, ep.waypoint_index, "");
    ++steps_here;
    if (adjudicate()) break;

    // Fix-point switching on the C-clamp being wrapped.
    const planner::WaypointTag* tag = active_tag(wp, ep.captured_clamps);
    if (tag && clamp_of(tag->clamp_id).kind == planner::ClampKind::C) {
      const planner::ClampSpec& c = clamp_of(tag->clamp_id);
      if (tracked_c != c.id) {
        tracked_c = c.id;
        ep.prev_cross_sign = 0;
      }
      const Pose2D O = ctx.sim.fixpoint;
      const Pose2D E = ctx.sim.gripper;
      if (should_switch_fixpoint(ep, O, E, c.center, c.kind)) engage(c);
      else record_cross_sign(ep, cross_sign(O, E, c.center));
    }

    const bool close = distance(ctx.sim.gripper, wp.position) <= kReachDistance &&
                       std::abs(ctx.observation.f - wp.f_d) <= kReachForce;
    reach_count = close ? reach_count + 1 : 0;
    const bool reached = reach_count >= kReachSteps;
    if (!reached && steps_here < options.waypoint_budget) continue;
    if (reached) ++report.waypoints_reached;
    else ++report.waypoints_stalled;
    ctx.log.back().event += reached ? "reached" : "stalled";

    // Primitives triggered by the waypoint's roles, in tag order.
    ep.phase = Phase::Primitive;
    bool stop = false;
    for (const auto& t : wp.tags) {
      const planner::ClampSpec& c = clamp_of(t.clamp_id);
      const Pose2D local = world_to_fixpoint(ep.frame, wp.position);
      const mpc::TrackingTarget frozen{local.x, local.y, wp.f_d};
      if (t.role == planner::WaypointRole::CSide1) {
        run_primitive(PrimitiveKind::CFirstSide, ctx, controller, frozen, c, ep.waypoint_index);
      } else if (t.role == planner::WaypointRole::CSide2) {
        if (!ep.captured_clamps.count(c.id)) {
          finish(Outcome::Failure, FailureMode::A, "left clamp " + c.id + " without routing around it");
          stop = true;
          break;
        }
        run_primitive(PrimitiveKind::CSecondSide, ctx, controller, frozen, c, ep.waypoint_index);
      } else if (t.role == planner::WaypointRole::UInsert) {
        const PrimitiveOutcome po = run_primitive(PrimitiveKind::UInsert, ctx, controller, frozen, c, ep.waypoint_index);
        if (po.failure != FailureMode::None) {
          finish(Outcome::Failure, po.failure,
                 "insertion into " + c.id + " failed (f " + format_double(po.force_at_descend) + " N, offset " +
                     format_double(po.alignment) + " mm)");
          stop = true;
          break;
        }
        ep.insertion_done = true;
        if (should_switch_fixpoint(ep, ctx.sim.fixpoint, ctx.sim.gripper, c.center, c.kind)) engage(c);
      } else {
        continue;
      }
      if (adjudicate()) {
        stop = true;
        break;
      }
    }
    if (stop) break;
    ep.phase = Phase::Following;

    ++ep.waypoint_index;
    reach_count = 0;
    steps_here = 0;
    if (ep.waypoint_index == plan.size()) {
      for (const auto& c : route)
        if (!ep.captured_clamps.count(c.id)) {
          finish(Outcome::Failure, c.kind == planner::ClampKind::U ? FailureMode::B : FailureMode::A,
                 "clamp " + c.id + " not engaged at the end of the plan");
          break;
        }
      if (ep.phase != Phase::Failed) finish(Outcome::Success, FailureMode::None, "");
    }
  }

  report.steps = ctx.step;
  report.cumulative_slip = ctx.sim.cumulative_slip;
  report.solver_nonconverged = controller.nonconverged() - nonconverged_before;
  report.max_solve_seconds = controller.max_solve_seconds();
  report.log = std::move(ctx.log);
  return report;
}

std::string episode_log_csv(const std::vector<LogRow>& log, const std::string& config_hash) {
  std::ostringstream out;
  if (!config_hash.empty()) out << "# config_hash: " << config_hash << '\n';
  out << "step,t,gripper_x,gripper_y,x,y,theta,phi,f,f_d,dx,dy,dtheta,waypoint,event\n";
  for (const LogRow& r : log) {
    out << r.step << ',' << format_double(r.step * kControlPeriod) << ',' << format_double(r.gripper.x) << ','
        << format_double(r.gripper.y) << ',' << format_double(r.observed.x) << ',' << format_double(r.observed.y)
        << ',' << format_double(r.observed.theta) << ',' << format_double(r.phi) << ','
        << format_double(r.observed.f) << ',' << format_double(r.f_d) << ',' << format_double(r.u.dx) << ','
        << format_double(r.u.dy) << ',' << format_double(r.u.dtheta) << ',' << r.waypoint_index << ',' << r.event
        << '\n';
  }
  return out.str();
}

std::string episode_report_json(const EpisodeReport& report, const std::string& log_path,
                                const std::string& config_hash) {
  nlohmann::json j;
  j["outcome"] = to_string(report.outcome);
  j["failure_mode"] = to_string(report.failure);
  j["failure_detail"] = report.failure_detail;
  j["steps"] = report.steps;
  j["engaged_clamps"] = report.engaged_clamps;
  j["waypoints_reached"] = report.waypoints_reached;
  j["waypoints_stalled"] = report.waypoints_stalled;
  j["max_tension"] = report.max_tension;
  j["cumulative_slip"] = report.cumulative_slip;
  j["solver_nonconverged"] = report.solver_nonconverged;
  j["log"] = log_path;
  j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

std::vector<TrackingSample> run_tracking(Controller& controller, const sim::SimParams& params,
                                         const TrackingOptions& options) {
  params.validate();
  if (options.steps < 1) throw ConfigError("tracking needs at least one step");
  if (!(options.stretch_mm > 0.0)) throw ConfigError("stretch must be positive");
  if (!(options.f_d >= 0.0)) throw ConfigError("tension target must be non-negative");

  constexpr double kGraspDistance = 50.0;
  sim::SimState s;
  s.gripper = {0.0, kGraspDistance};
  s.rest_length = kGraspDistance + options.stretch_mm;
  s.rng_seed = mix_seed(options.seed, 3);

  // Scripted stretch to the point where the wire straightens.
  double remaining = options.stretch_mm;
  while (remaining > 0.0) {
    const double dy = std::min(remaining, kMaxTranslationStep);
    s = sim::step(s, {0.0, dy, 0.0}, params).state;
    remaining -= dy;
  }
  sim::StepResult r = sim::observe(s, params);
  s = r.state;

  const mpc::TrackingTarget target{0.0, kGraspDistance + options.stretch_mm, options.f_d};
  controller.reset();
  std::vector<TrackingSample> trace;
  trace.reserve(static_cast<std::size_t>(options.steps) + 1);
  trace.push_back({0.0, r.observation.f, options.f_d, r.observation, s.phi.phi});
  for (int k = 1; k <= options.steps; ++k) {
    // A zero target asks for no tension: the straightened wire is already there, so hold still.
    const ControlCommand u = options.f_d > 0.0 ? controller.command(r.observation, s.phi, target) : ControlCommand{};
    r = sim::step(s, clamp_to_bounds(u), params);
    s = r.state;
    trace.push_back({k * kControlPeriod, r.observation.f, options.f_d, r.observation, s.phi.phi});
  }
  return trace;
}

std::string tracking_csv(const std::vector<TrackingSample>& trace, const std::string& config_hash) {
  std::ostringstream out;
  if (!config_hash.empty()) out << "# config_hash: " << config_hash << '\n';
  out << "t,f,f_d,x,y,theta,phi\n";
  for (const auto& s : trace)
    out << format_double(s.t) << ',' << format_double(s.f) << ',' << format_double(s.f_d) << ','
        << format_double(s.state.x) << ',' << format_double(s.state.y) << ',' << format_double(s.state.theta)
        << ',' << format_double(s.phi) << '\n';
  return out.str();
}

double steady_state_error(const std::vector<TrackingSample>& trace, std::size_t window) {
  if (trace.empty() || window == 0) throw ConfigError("steady-state window is empty");
  window = std::min(window, trace.size());
  double sum = 0.0;
  for (std::size_t i = trace.size() - window; i < trace.size(); ++i) sum += std::abs(trace[i].f - trace[i].f_d);
  return sum / static_cast<double>(window);
}

double steady_state_mean(const std::vector<TrackingSample>& trace, std::size_t window) {
  if (trace.empty() || window == 0) throw ConfigError("steady-state window is empty");
  window = std::min(window, trace.size());
  double sum = 0.0;
  for (std::size_t i = trace.size() - window; i < trace.size(); ++i) sum += trace[i].f;
  return sum / static_cast<double>(window);
}

}  // namespace wireharness::executive
