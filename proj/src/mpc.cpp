#include "wireharness/mpc.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "wireharness/errors.hpp"

namespace wireharness::mpc {

namespace {

constexpr int kNu = 3;
constexpr int kNs = 4;  // bounded entries: x, y, theta, f

// Condensed horizon problem over the stacked controls U (3H).
struct Condensed {
  int n = 0;
  int horizon = 0;
  Eigen::MatrixXd phi;         // (nH x 3H) lifted rollout sensitivity
  Eigen::VectorXd free;        // (nH) free response
  Eigen::VectorXd goal;        // (nH) stacked g_d
  Eigen::VectorXd q;           // (nH) stacked state weights
  Eigen::VectorXd r;           // (3H) stacked control weights
  Eigen::Vector4d lower, upper, bound_weight;
  Eigen::VectorXd lo, hi;      // (3H) control box

  double objective(const Eigen::VectorXd& U) const {
    const Eigen::VectorXd g = phi * U + free;
    const Eigen::VectorXd e = g - goal;
    double val = (q.array() * e.array().square()).sum() + (r.array() * U.array().square()).sum();
    for (int t = 0; t < horizon; ++t)
      for (int k = 0; k < kNs; ++k) {
        const double v = g[t * n + k];
        const double viol = v > upper[k] ? v - upper[k] : (v < lower[k] ? lower[k] - v : 0.0);
        val += bound_weight[k] * viol * viol;
      }
    return val;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& U) const {
    const Eigen::VectorXd g = phi * U + free;
    Eigen::VectorXd w = 2.0 * (q.array() * (g - goal).array()).matrix();
    for (int t = 0; t < horizon; ++t)
      for (int k = 0; k < kNs; ++k) {
        const double v = g[t * n + k];
        if (v > upper[k]) w[t * n + k] += 2.0 * bound_weight[k] * (v - upper[k]);
        else if (v < lower[k]) w[t * n + k] -= 2.0 * bound_weight[k] * (lower[k] - v);
      }
    return phi.transpose() * w + 2.0 * (r.array() * U.array()).matrix();
  }
};

Eigen::VectorXd target_lift(int n, const TrackingTarget& target) {
  Eigen::VectorXd gd = Eigen::VectorXd::Zero(n);
  gd[0] = target.x_d;
  gd[1] = target.y_d;
  gd[3] = target.f_d;
  return gd;
}

Condensed condense(const koopman::KoopmanModel& model, const Eigen::VectorXd& g0,
                   const TrackingTarget& target, const MpcConfig& cfg) {
  Condensed c;
  const int n = model.dim();
  const int H = cfg.horizon;
  c.n = n;
  c.horizon = H;

  std::vector<Eigen::MatrixXd> kl(static_cast<std::size_t>(H));  // K^k L
  kl[0] = model.L;
  for (int k = 1; k < H; ++k) kl[k] = model.K * kl[k - 1];

  c.phi = Eigen::MatrixXd::Zero(n * H, kNu * H);
  c.free.resize(n * H);
  Eigen::VectorXd g = g0;
  for (int t = 0; t < H; ++t) {
    g = model.K * g;
    c.free.segment(t * n, n) = g;
    for (int j = 0; j <= t; ++j) c.phi.block(t * n, j * kNu, n, kNu) = kl[t - j];
  }

  const Eigen::VectorXd gd = target_lift(n, target);
  c.goal = gd.replicate(H, 1);
  c.q = effective_q(cfg, n).replicate(H, 1);
  c.r = effective_r(cfg).replicate(H, 1);

  const double s2 = cfg.position_scale * cfg.position_scale;
  c.lower = cfg.state_lower;
  c.upper = cfg.state_upper;
  c.bound_weight = cfg.state_penalty * Eigen::Vector4d(s2, s2, 1.0, 1.0);
  c.lo = cfg.control_lower.replicate(H, 1);
  c.hi = cfg.control_upper.replicate(H, 1);
  return c;
}

}  // namespace

Eigen::VectorXd MpcConfig::default_q() {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(kLiftDim);
  q[0] = 10.0;
  q[1] = 10.0;
  q[3] = 1.0;
  return q;
}

void MpcConfig::validate() const {
  if (horizon < 1) throw ConfigError("MPC horizon must be at least 1");
  if (q_diag.size() < kNs) throw ConfigError("MPC Q needs at least 4 diagonal entries");
  if ((q_diag.array() < 0.0).any() || (r_diag.array() < 0.0).any())
    throw ConfigError("MPC weights must be non-negative");
  if ((state_lower.array() > state_upper.array()).any()) throw ConfigError("MPC state bounds inverted");
  if ((control_lower.array() > control_upper.array()).any())
    throw ConfigError("MPC control bounds inverted");
  if (!(tolerance > 0.0) || max_iterations < 1 || !(state_penalty >= 0.0) || !(position_scale > 0.0))
    throw ConfigError("MPC solver settings invalid");
}

Eigen::VectorXd effective_q(const MpcConfig& cfg, int lift_dim) {
  if (cfg.q_diag.size() < lift_dim) throw ConfigError("MPC Q shorter than the model lift");
  Eigen::VectorXd q = cfg.q_diag.head(lift_dim);
  const double s2 = cfg.position_scale * cfg.position_scale;
  q[0] *= s2;
  q[1] *= s2;
  return q;
}

Eigen::Vector3d effective_r(const MpcConfig& cfg) {
  const double s2 = cfg.position_scale * cfg.position_scale;
  return {cfg.r_diag[0] * s2, cfg.r_diag[1] * s2, cfg.r_diag[2]};
}

double plan_objective(const koopman::KoopmanModel& model, const WireState& state, TwistAngle twist,
                      const TrackingTarget& target, const MpcConfig& cfg,
                      std::span<const ControlCommand> plan) {
  cfg.validate();
  if (static_cast<int>(plan.size()) != cfg.horizon) throw ConfigError("plan length must equal the horizon");
  const Condensed c = condense(model, koopman::lift_state(model.lift, state, twist), target, cfg);
  Eigen::VectorXd U(kNu * cfg.horizon);
  for (int t = 0; t < cfg.horizon; ++t) U.segment<kNu>(kNu * t) = plan[t].vec();
  return c.objective(U);
}

namespace {

MpcSolution solve_impl(const koopman::KoopmanModel& model, const WireState& state, TwistAngle twist,
                       const TrackingTarget& target, const MpcConfig& cfg, bool throw_on_stall) {
  cfg.validate();
  model.validate();

  const Eigen::VectorXd g0 = koopman::lift_state(model.lift, state, twist);
  for (int k = 0; k < kNs; ++k)
    if (g0[k] < cfg.state_lower[k] || g0[k] > cfg.state_upper[k])
      throw BoundsError("initial state outside the MPC state bounds");

  const Condensed c = condense(model, g0, target, cfg);
  const int m = kNu * cfg.horizon;

  // Quadratic part 1/2 U^T Hq U + hq^T U, used for the start point and the step size.
  const Eigen::VectorXd qphi_off = c.q.asDiagonal() * (c.free - c.goal);
  const Eigen::MatrixXd Hq =
      2.0 * (c.phi.transpose() * c.q.asDiagonal() * c.phi) + Eigen::MatrixXd(2.0 * c.r.asDiagonal());
  const Eigen::VectorXd hq = 2.0 * c.phi.transpose() * qphi_off;

  // Jacobi scaling U = D v keeps the box a box.
  const double hmax = std::max(Hq.diagonal().maxCoeff(), std::numeric_limits<double>::min());
  Eigen::VectorXd d(m);
  for (int i = 0; i < m; ++i) d[i] = 1.0 / std::sqrt(std::max(Hq(i, i), 1e-12 * hmax));
  const Eigen::VectorXd lo = c.lo.cwiseQuotient(d);
  const Eigen::VectorXd hi = c.hi.cwiseQuotient(d);
  auto project = [&](const Eigen::VectorXd& v) { return v.cwiseMax(lo).cwiseMin(hi).eval(); };
  auto F = [&](const Eigen::VectorXd& v) { return c.objective(d.cwiseProduct(v)); };
  auto gradF = [&](const Eigen::VectorXd& v) { return d.cwiseProduct(c.gradient(d.cwiseProduct(v))).eval(); };

  const Eigen::MatrixXd Hs = d.asDiagonal() * Hq * d.asDiagonal();
  double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Hs, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  lip = std::max(lip, 1e-12);

  Eigen::VectorXd U0 = Hq.ldlt().solve(-hq);
  if (!U0.allFinite()) U0.setZero();
  Eigen::VectorXd v = project(U0.cwiseQuotient(d));
  double Fv = F(v);

  const double tol = cfg.tolerance * (1.0 + hq.cwiseProduct(d).cwiseAbs().maxCoeff());
  auto residual_at = [&](const Eigen::VectorXd& x) {
    return lip * (x - project(x - gradF(x) / lip)).cwiseAbs().maxCoeff();
  };

  MpcSolution sol;
  Eigen::VectorXd y = v;
  Eigen::VectorXd v_prev = v;
  double t = 1.0;
  double res = residual_at(v);
  int it = 0;
  // Monotone FISTA with backtracking and momentum restart.
  while (res > tol && it < cfg.max_iterations) {
    ++it;
    const Eigen::VectorXd gy = gradF(y);
    const double Fy = F(y);
    Eigen::VectorXd z;
    double Fz = 0.0;
    for (;;) {
      z = project(y - gy / lip);
      Fz = F(z);
      const Eigen::VectorXd dz = z - y;
      if (Fz <= Fy + gy.dot(dz) + 0.5 * lip * dz.squaredNorm() + 1e-14 * std::abs(Fy)) break;
      lip *= 2.0;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    v_prev = v;
    if (Fz <= Fv) {
      v = z;
      Fv = Fz;
      y = v + ((t - 1.0) / t_next) * (v - v_prev);
      t = t_next;
    } else {
      // No decrease: keep the incumbent and restart the momentum.
      y = v;
      t = 1.0;
    }
    sol.objective_history.push_back(Fv);
    res = residual_at(v);
  }

  const Eigen::VectorXd U = d.cwiseProduct(v).cwiseMax(c.lo).cwiseMin(c.hi);
  sol.objective = c.objective(U);
  sol.residual = res;
  sol.iterations = it;
  sol.plan.reserve(static_cast<std::size_t>(cfg.horizon));
  for (int k = 0; k < cfg.horizon; ++k) sol.plan.push_back(ControlCommand::from_vec(U.segment<kNu>(kNu * k)));
  sol.command = sol.plan.front();
  sol.converged = res <= tol;
  if (!sol.converged && throw_on_stall)
    throw SolverError("MPC solver did not converge within " + std::to_string(cfg.max_iterations) +
                          " iterations (residual " + std::to_string(res) + ")",
                      res, it);
  return sol;
}

}  // namespace

MpcSolution solve_detailed(const koopman::KoopmanModel& model, const WireState& state, TwistAngle twist,
                           const TrackingTarget& target, const MpcConfig& cfg) {
  return solve_impl(model, state, twist, target, cfg, true);
}

MpcSolution solve_best_effort(const koopman::KoopmanModel& model, const WireState& state, TwistAngle twist,
                              const TrackingTarget& target, const MpcConfig& cfg) {
  return solve_impl(model, state, twist, target, cfg, false);
}

ControlCommand NoTwistPi::operator()(const WireState& state, const TrackingTarget& target) {
  const double error = target.f_d - state.f;
  const double limit = gains_.ki > 0.0 ? gains_.integral_clamp / gains_.ki : 0.0;
  integral_ = std::clamp(integral_ + error, -limit, limit);
  const double stretch = gains_.kp * error + gains_.ki * integral_;

  const Pose2D goal{target.x_d, target.y_d};
  Pose2D dir = goal.norm() > 0.0 ? goal : state.position();
  const double len = dir.norm();
  dir = len > 0.0 ? (1.0 / len) * dir : Pose2D{};

  Pose2D move = (goal - state.position()) + stretch * dir;
  const double peak = std::max(std::abs(move.x), std::abs(move.y));
  if (peak > kMaxTranslationStep) move = (kMaxTranslationStep / peak) * move;
  return clamp_to_bounds({move.x, move.y, 0.0});
}

koopman::KoopmanModel LinearDynamics::as_model() const {
  koopman::KoopmanModel m;
  m.K = A;
  m.L = B;
  m.lift = koopman::LiftKind::Raw;
  return m;
}

LinearDynamics fit_linear_baseline(std::span<const Trajectory> trajs) {
  const koopman::KoopmanModel m = koopman::fit(trajs, koopman::LiftKind::Raw);
  return {m.K, m.L};
}

}  // namespace wireharness::mpc
