#pragma once

// Episode orchestration against the simulator: waypoint following, insertion
// primitives, fix-point switching and failure adjudication.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wireharness/core.hpp"
#include "wireharness/io.hpp"
#include "wireharness/koopman.hpp"
#include "wireharness/mpc.hpp"
#include "wireharness/planner.hpp"
#include "wireharness/sim.hpp"

namespace wireharness::executive {

enum class ControllerKind { KoopmanMpc, LinearMpc, PiNoTwist };

std::string to_string(ControllerKind kind);
/// Accepts "koopman_mpc", "linear_mpc", "pi_no_twist". Throws ConfigError otherwise.
ControllerKind controller_from_string(const std::string& name);

/// Uniform front for the three controllers. The PI integral lives here, so one
/// instance belongs to one control loop.
class Controller {
 public:
  /// `model` is the Koopman model for KoopmanMpc and the raw-lift model for LinearMpc; unused for PI.
  Controller(ControllerKind kind, koopman::KoopmanModel model, mpc::MpcConfig cfg, mpc::PiGains gains = {});

  ControlCommand command(const WireState& state, TwistAngle twist, const mpc::TrackingTarget& target);
  ControllerKind kind() const { return kind_; }
  void reset() { pi_.reset(); }

  int solves() const { return solves_; }
  int nonconverged() const { return nonconverged_; }
  int out_of_bounds() const { return out_of_bounds_; }
  double max_solve_seconds() const { return max_solve_seconds_; }
  double total_solve_seconds() const { return total_solve_seconds_; }

 private:
  ControllerKind kind_;
  koopman::KoopmanModel model_;
  mpc::MpcConfig cfg_;
  mpc::NoTwistPi pi_;
  int solves_ = 0;
  int nonconverged_ = 0;
  int out_of_bounds_ = 0;
  double max_solve_seconds_ = 0.0;
  double total_solve_seconds_ = 0.0;
};

enum class Phase { Following, Primitive, Done, Failed };
enum class FailureMode { None, A, B, C, D };
enum class Outcome { Success, Failure, Timeout };

std::string to_string(Phase p);
std::string to_string(FailureMode m);
std::string to_string(Outcome o);

struct EpisodeState {
  FixPointFrame frame;
  std::size_t waypoint_index = 0;
  int prev_cross_sign = 0;
  std::set<std::string> captured_clamps;
  Phase phase = Phase::Following;
  bool insertion_done = false;  // insertion primitive finished for the targeted U-clamp
};

/// Sign of the z-component of (E - O) x (C - E).
int cross_sign(Pose2D O, Pose2D E, Pose2D C);

/// C-clamp: gripper farther from O than the clamp and the side of the wire relative to the
/// clamp flipped between two nonzero readings. U-clamp: the insertion primitive has run.
bool should_switch_fixpoint(const EpisodeState& episode, Pose2D O, Pose2D E, Pose2D C, planner::ClampKind kind);

/// Records a new cross-sign reading; zero never overwrites.
void record_cross_sign(EpisodeState& episode, int sign);

enum class PrimitiveKind { CFirstSide, CSecondSide, UInsert };

struct PrimitiveStep {
  enum class Kind { Descend, Ascend, Lateral, Dwell };
  Kind kind;
  double amount = 0.0;  // mm (signed for Lateral)
};

struct PrimitiveScript {
  std::vector<PrimitiveStep> steps;
  bool maintain_twist = false;
};

PrimitiveScript primitive_script(PrimitiveKind kind);
std::string to_string(PrimitiveKind kind);
std::string to_string(PrimitiveStep::Kind kind);

inline constexpr double kPrimitiveDepth = 30.0;     // mm, descend/ascend
inline constexpr double kPrimitiveTraverse = 20.0;  // mm, along the U-clamp edge
inline constexpr double kCaptureForce = 6.0;        // N
inline constexpr double kCaptureAlignment = 10.0;   // mm
inline constexpr double kConnectorLimit = 15.0;     // N
inline constexpr double kSlipBudget = 120.0;        // mm
inline constexpr double kReachDistance = 5.0;       // mm
inline constexpr double kReachForce = 1.0;          // N
inline constexpr int kReachSteps = 2;

/// Shortest distance from point p to segment [a, b].
double point_segment_distance(Pose2D p, Pose2D a, Pose2D b);

struct LogRow {
  int step = 0;
  Pose2D gripper;     // world
  WireState observed; // fix-point frame
  double phi = 0.0;
  double f_d = 0.0;
  ControlCommand u;
  std::size_t waypoint_index = 0;
  std::string event;
};

/// Mutable context shared by the loop and the primitives.
struct EpisodeContext {
  sim::SimState sim;
  sim::SimParams params;
  WireState observation;
  int step = 0;
  std::vector<LogRow> log;

  void advance(const ControlCommand& u, double f_d, std::size_t waypoint_index, const std::string& event);
};

struct PrimitiveOutcome {
  bool captured = false;         // U-clamps only
  FailureMode failure = FailureMode::None;
  double force_at_descend = 0.0;
  double alignment = 0.0;        // mm, wire-to-mouth distance at descend
  int steps = 0;
};

/// Runs a primitive at the current waypoint. Z moves are logged annotations executed as one
/// control period each; lateral moves translate the gripper along `edge_axis`.
PrimitiveOutcome run_primitive(PrimitiveKind kind, EpisodeContext& ctx, Controller& controller,
                               const mpc::TrackingTarget& frozen_target, const planner::ClampSpec& clamp,
                               std::size_t waypoint_index);

struct EpisodeOptions {
  int max_steps = 600;
  int waypoint_budget = 80;  // steps at one waypoint before moving on unconverged
  std::uint64_t seed = 0;
  double grasp_jitter = 5.0;       // mm, uniform on each axis and on rest length
};

struct EpisodeReport {
  Outcome outcome = Outcome::Timeout;
  FailureMode failure = FailureMode::None;
  std::string failure_detail;
  int steps = 0;
  std::vector<std::string> engaged_clamps;  // in engagement order
  std::size_t waypoints_reached = 0;
  std::size_t waypoints_stalled = 0;
  double max_tension = 0.0;
  double cumulative_slip = 0.0;
  int solver_nonconverged = 0;
  double max_solve_seconds = 0.0;
  std::vector<LogRow> log;
};

/// Runs one harnessing episode for `route` (clamp specs in sequence) along `plan`.
/// `board` supplies the connector, grasp and the full clamp set for the tangle check.
EpisodeReport run_episode(const io::BoardLayout& board, const std::vector<planner::ClampSpec>& route,
                          const std::vector<planner::Waypoint>& plan, Controller& controller,
                          const sim::SimParams& params, const EpisodeOptions& options);

std::string episode_log_csv(const std::vector<LogRow>& log, const std::string& config_hash);
/// Deterministic report body; wall-clock data is kept out of it.
std::string episode_report_json(const EpisodeReport& report, const std::string& log_path,
                                const std::string& config_hash);

// Tension-tracking protocol: the gripper grasps a slack wire 50 mm from the fix-point,
// stretches `stretch_mm` along +Y to the point where the wire just straightens, and
// must hold tension f_d there. Twist starts at zero.
struct TrackingSample {
  double t = 0.0;
  double f = 0.0;
  double f_d = 0.0;
  WireState state;
  double phi = 0.0;
};

struct TrackingOptions {
  double f_d = 10.0;
  double stretch_mm = 250.0;
  int steps = 60;
  std::uint64_t seed = 0;
};

std::vector<TrackingSample> run_tracking(Controller& controller, const sim::SimParams& params,
                                         const TrackingOptions& options);
std::string tracking_csv(const std::vector<TrackingSample>& trace, const std::string& config_hash);

/// Mean |f - f_d| over the last `window` samples.
double steady_state_error(const std::vector<TrackingSample>& trace, std::size_t window);
double steady_state_mean(const std::vector<TrackingSample>& trace, std::size_t window);

}  // namespace wireharness::executive
