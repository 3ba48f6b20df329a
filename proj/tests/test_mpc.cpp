#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "wireharness/errors.hpp"
#include "wireharness/koopman.hpp"
#include "wireharness/mpc.hpp"
#include "wireharness/sim.hpp"

using namespace wireharness;
using namespace wireharness::mpc;

namespace {

const koopman::KoopmanModel& sim_model() {
  static const koopman::KoopmanModel m = [] {
    const auto data = sim::scripted_collect(40, 60, 1, sim::SimParams{});
    return koopman::fit(koopman::augment_dataset(data));
  }();
  return m;
}

koopman::KoopmanModel random_model(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  koopman::KoopmanModel m;
  m.K = Eigen::MatrixXd(20, 20);
  m.L = Eigen::MatrixXd(20, 3);
  for (Eigen::Index i = 0; i < 20; ++i) {
    for (Eigen::Index j = 0; j < 20; ++j) m.K(i, j) = 0.2 * n01(rng);
    for (Eigen::Index j = 0; j < 3; ++j) m.L(i, j) = n01(rng);
  }
  return m;
}

MpcConfig wide_open(int horizon) {
  MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.state_lower = Eigen::Vector4d::Constant(-1e12);
  cfg.state_upper = Eigen::Vector4d::Constant(1e12);
  cfg.control_lower = Eigen::Vector3d::Constant(-1e9);
  cfg.control_upper = Eigen::Vector3d::Constant(1e9);
  cfg.tolerance = 1e-10;
  cfg.max_iterations = 20000;
  return cfg;
}

}  // namespace

TEST_SUITE("mpc") {

TEST_CASE("default weights") {
  const MpcConfig cfg;
  const Eigen::VectorXd q = MpcConfig::default_q();
  REQUIRE(q.size() == 20);
  CHECK(q[0] == 10.0);
  CHECK(q[1] == 10.0);
  CHECK(q[2] == 0.0);
  CHECK(q[3] == 1.0);
  CHECK(q.tail(16).isZero(0.0));
  CHECK(cfg.r_diag == Eigen::Vector3d(0.1, 0.1, 0.1));
  CHECK(cfg.horizon == 10);
  CHECK(cfg.state_penalty == 1e3);
  CHECK(cfg.state_upper[3] == 15.0);
}

TEST_CASE("already at target with identity dynamics gives zero motion") {
  koopman::KoopmanModel m;
  m.K = Eigen::MatrixXd::Identity(20, 20);
  m.L = Eigen::MatrixXd::Zero(20, 3);
  m.L.topRows(3) = Eigen::Matrix3d::Identity();
  const WireState s{30, 200, 0.0, 7.0};
  const ControlCommand u = solve(m, s, {0.0}, {30, 200, 7.0}, MpcConfig{});
  CHECK(std::abs(u.dx) < 1e-9);
  CHECK(std::abs(u.dy) < 1e-9);
  CHECK(std::abs(u.dtheta) < 1e-9);
}

TEST_CASE("single-step horizon matches the ridge closed form") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n01(0.0, 1.0);
  const MpcConfig cfg = wide_open(1);
  for (int n = 0; n < 100; ++n) {
    const koopman::KoopmanModel m = random_model(rng);
    const WireState s{n01(rng), n01(rng), 0.1 * n01(rng), std::abs(n01(rng))};
    const TwistAngle phi{n01(rng)};
    const TrackingTarget target{n01(rng), n01(rng), std::abs(n01(rng))};
    const Eigen::VectorXd q = effective_q(cfg, 20);
    const Eigen::Vector3d r = effective_r(cfg);
    Eigen::VectorXd gd = Eigen::VectorXd::Zero(20);
    gd << target.x_d, target.y_d, 0.0, target.f_d, Eigen::VectorXd::Zero(16);
    const Eigen::MatrixXd Q = q.asDiagonal();
    const Eigen::Matrix3d lhs = m.L.transpose() * Q * m.L + Eigen::Matrix3d(r.asDiagonal());
    const Eigen::Vector3d ustar = lhs.ldlt().solve(m.L.transpose() * Q * (gd - m.K * lift(s, phi)));
    const ControlCommand u = solve(m, s, phi, target, cfg);
    CHECK((u.vec() - ustar).norm() <= 1e-4 * std::max(ustar.norm(), 1e-8));
  }
}

TEST_CASE("returned controls stay inside the box and the solver is monotone") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MpcConfig cfg;
  for (int n = 0; n < 30; ++n) {
    const WireState s{150 * u(rng), 200 + 100 * u(rng), u(rng), 5 + 4 * u(rng)};
    const TrackingTarget target{150 * u(rng), 200 + 100 * u(rng), 5 + 5 * u(rng)};
    const MpcSolution sol = solve_detailed(sim_model(), s, {1.5 + u(rng)}, target, cfg);
    for (const auto& c : sol.plan) {
      CHECK(c.within_bounds());
    }
    for (std::size_t k = 1; k < sol.objective_history.size(); ++k)
      CHECK(sol.objective_history[k] <= sol.objective_history[k - 1]);
    CHECK(sol.converged);
  }
}

TEST_CASE("solution is no worse than nearby feasible plans") {
  MpcConfig cfg;
  const WireState s{0, 300, 0.0, 4.0};
  const TrackingTarget target{0, 300, 10.0};
  const MpcSolution sol = solve_detailed(sim_model(), s, {0.0}, target, cfg);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 50; ++n) {
    std::vector<ControlCommand> p = sol.plan;
    for (auto& c : p) c = clamp_to_bounds({c.dx + 0.5 * u(rng), c.dy + 0.5 * u(rng), c.dtheta + 0.002 * u(rng)});
    CHECK(plan_objective(sim_model(), s, {0.0}, target, cfg, p) >= sol.objective - 1e-6 * std::abs(sol.objective));
  }
}

TEST_CASE("fix-point translation leaves the command unchanged") {
  const MpcConfig cfg;
  const Pose2D gripper{40, 310};
  const Pose2D waypoint{60, 330};
  ControlCommand first{};
  for (const Pose2D origin : {Pose2D{0, 0}, Pose2D{-250, 75}, Pose2D{1000, -3}}) {
    const FixPointFrame frame{origin};
    const Pose2D shift{origin.x + 17.0, origin.y - 4.0};
    const FixPointFrame moved{shift};
    const Pose2D g = world_to_fixpoint(frame, fixpoint_to_world(frame, gripper));
    const Pose2D w = world_to_fixpoint(frame, fixpoint_to_world(frame, waypoint));
    const Pose2D g2 = world_to_fixpoint(moved, fixpoint_to_world(moved, gripper));
    const Pose2D w2 = world_to_fixpoint(moved, fixpoint_to_world(moved, waypoint));
    const ControlCommand a = solve(sim_model(), {g.x, g.y, 0.2, 6.0}, {1.0}, {w.x, w.y, 7.0}, cfg);
    const ControlCommand b = solve(sim_model(), {g2.x, g2.y, 0.2, 6.0}, {1.0}, {w2.x, w2.y, 7.0}, cfg);
    CHECK((a.vec() - b.vec()).norm() < 1e-6);
    if (origin == Pose2D{0, 0}) first = a;
    CHECK((a.vec() - first.vec()).norm() < 1e-6);
  }
}

TEST_CASE("solver errors") {
  MpcConfig cfg;
  CHECK_THROWS_AS(solve(sim_model(), {0, 0, 0, 20.0}, {0}, {0, 0, 5}, cfg), BoundsError);
  CHECK_THROWS_AS(solve(sim_model(), {500, 0, 0, 2.0}, {0}, {0, 0, 5}, cfg), BoundsError);
  cfg.max_iterations = 1;
  cfg.tolerance = 1e-14;
  try {
    solve_detailed(sim_model(), {0, 300, 0, 4.0}, {0}, {80, 250, 10}, cfg);
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(e.iterations() == 1);
    CHECK(e.residual() > 0.0);
  }
  const MpcSolution best = solve_best_effort(sim_model(), {0, 300, 0, 4.0}, {0}, {80, 250, 10}, cfg);
  CHECK_FALSE(best.converged);
  CHECK(best.command.within_bounds());
}

TEST_CASE("config validation") {
  MpcConfig cfg;
  cfg.horizon = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = MpcConfig{};
  cfg.r_diag[1] = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = MpcConfig{};
  cfg.state_lower[0] = 500.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("no-twist PI") {
  NoTwistPi pi;
  const ControlCommand still = pi({0, 300, 0, 10.0}, {0, 300, 10.0});
  CHECK(still == ControlCommand{0, 0, 0});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 200; ++n) {
    const ControlCommand c = pi({300 * u(rng), 300 * u(rng), u(rng), 8 + 8 * u(rng)}, {300 * u(rng), 300 * u(rng), 10});
    CHECK(c.dtheta == 0.0);
    CHECK(c.within_bounds());
  }
  // Anti-windup: the integral term never exceeds its clamp.
  NoTwistPi wind;
  for (int n = 0; n < 1000; ++n) wind({0, 300, 0, 0.0}, {0, 300, 10.0});
  CHECK(wind.integral() * PiGains{}.ki == doctest::Approx(PiGains{}.integral_clamp));
  // Below target on the target ray: stretch outward along it.
  NoTwistPi fresh;
  const ControlCommand out = fresh({0, 300, 0, 2.0}, {0, 300, 10.0});
  CHECK(out.dx == 0.0);
  CHECK(out.dy > 0.0);
}

TEST_CASE("linear baseline recovers an exact linear system") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 3> B;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) A(i, j) = 0.4 * n01(rng);
    for (int j = 0; j < 3; ++j) B(i, j) = n01(rng);
  }
  std::vector<Trajectory> data;
  for (int k = 0; k < 5; ++k) {
    Trajectory t;
    Eigen::Vector4d s(n01(rng), n01(rng), n01(rng), n01(rng));
    for (int step = 0; step < 12; ++step) {
      t.states.push_back({s[0], s[1], s[2], s[3]});
      t.twists.push_back({});
      const ControlCommand u{5 * n01(rng), 5 * n01(rng), 0.01 * n01(rng)};
      t.controls.push_back(u);
      s = A * s + B * u.vec();
    }
    t.states.push_back({s[0], s[1], s[2], s[3]});
    t.twists.push_back({});
    data.push_back(t);
  }
  const LinearDynamics lin = fit_linear_baseline(data);
  CHECK((lin.A - A).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((lin.B - B).cwiseAbs().maxCoeff() < 1e-8);
  const koopman::KoopmanModel m = lin.as_model();
  CHECK(m.lift == koopman::LiftKind::Raw);
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("linear baseline interpolates a single transition") {
  Trajectory t;
  t.states = {{100, 50, 0.1, 2.0}, {104, 53, 0.12, 2.5}};
  t.twists = {{}, {}};
  t.controls = {{4, 3, 0.02}};
  const LinearDynamics lin = fit_linear_baseline(std::vector<Trajectory>{t});
  const Eigen::Vector4d s0(100, 50, 0.1, 2.0);
  const Eigen::Vector4d pred = lin.A * s0 + lin.B * t.controls[0].vec();
  CHECK((pred - Eigen::Vector4d(104, 53, 0.12, 2.5)).norm() < 1e-9);
  CHECK_THROWS_AS(fit_linear_baseline(std::vector<Trajectory>{}), FitError);
}

TEST_CASE("the lifted model explains the raw state better than the linear baseline") {
  const auto data = koopman::augment_dataset(sim::scripted_collect(40, 60, 1, sim::SimParams{}));
  const LinearDynamics lin = fit_linear_baseline(data);
  double lin_res = 0.0;
  double koop_res = 0.0;
  for (const auto& t : data)
    for (std::size_t i = 0; i < t.transitions(); ++i) {
      const Eigen::Vector4d s0(t.states[i].x, t.states[i].y, t.states[i].theta, t.states[i].f);
      const Eigen::Vector4d s1(t.states[i + 1].x, t.states[i + 1].y, t.states[i + 1].theta, t.states[i + 1].f);
      lin_res += (s1 - lin.A * s0 - lin.B * t.controls[i].vec()).squaredNorm();
      const Eigen::VectorXd g = koopman::predict_one_step(sim_model(), t.states[i], t.twists[i], t.controls[i]);
      koop_res += (s1 - g.head(4)).squaredNorm();
    }
  CHECK(lin_res > koop_res);
}

}
