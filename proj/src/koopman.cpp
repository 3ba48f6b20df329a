#include "wireharness/koopman.hpp"

#include <Eigen/SVD>

#include "wireharness/errors.hpp"

namespace wireharness::koopman {

namespace {

constexpr int kControlDim = 3;
constexpr const char* kRawLiftSpec = "raw(x,y,theta,f)";

Eigen::VectorXd stacked(LiftKind kind, const WireState& s, TwistAngle phi, const ControlCommand& u) {
  const int n = lift_dim(kind);
  Eigen::VectorXd out(n + kControlDim);
  out.head(n) = lift_state(kind, s, phi);
  out.tail(kControlDim) = u.vec();
  return out;
}

}  // namespace

int lift_dim(LiftKind kind) { return kind == LiftKind::Poly2 ? kLiftDim : 4; }

std::string lift_spec(LiftKind kind) {
  return kind == LiftKind::Poly2 ? kPoly2LiftSpec : kRawLiftSpec;
}

LiftKind lift_kind_from_spec(const std::string& spec) {
  if (spec == kPoly2LiftSpec) return LiftKind::Poly2;
  if (spec == kRawLiftSpec) return LiftKind::Raw;
  throw ConfigError("unknown lift_spec '" + spec + "'");
}

Eigen::VectorXd lift_state(LiftKind kind, const WireState& state, TwistAngle twist) {
  if (kind == LiftKind::Poly2) return lift(state, twist);
  return Eigen::Vector4d(state.x, state.y, state.theta, state.f);
}

void KoopmanModel::validate() const {
  const int n = lift_dim(lift);
  if (K.rows() != n || K.cols() != n) throw ConfigError("K has the wrong shape for its lift");
  if (L.rows() != n || L.cols() != kControlDim) throw ConfigError("L has the wrong shape for its lift");
  if (!K.allFinite() || !L.allFinite()) throw ConfigError("model contains non-finite entries");
}

std::vector<double> augmentation_angles() {
  std::vector<double> out;
  for (int k = 0; k < 10; ++k) out.push_back(-kPi + k * kPi / 5.0);
  return out;
}

Trajectory augment(const Trajectory& traj, double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  Trajectory out = traj;
  for (auto& st : out.states) {
    const double x = st.x;
    const double y = st.y;
    st.x = c * x - s * y;
    st.y = s * x + c * y;
    st.theta = wrap_angle(st.theta + psi);
  }
  for (auto& u : out.controls) {
    const double dx = u.dx;
    const double dy = u.dy;
    u.dx = c * dx - s * dy;
    u.dy = s * dx + c * dy;
  }
  return out;
}

std::vector<Trajectory> augment_dataset(std::span<const Trajectory> trajs) {
  std::vector<Trajectory> out;
  const auto angles = augmentation_angles();
  out.reserve(trajs.size() * angles.size());
  for (const auto& t : trajs)
    for (double psi : angles) out.push_back(augment(t, psi));
  return out;
}

NormalEquations accumulate(std::span<const Trajectory> trajs, LiftKind kind) {
  const int n = lift_dim(kind);
  std::size_t count = 0;
  for (const auto& t : trajs) count += t.transitions();
  if (count == 0) throw FitError("dataset contains no transitions");

  Eigen::MatrixXd X(n + kControlDim, static_cast<Eigen::Index>(count));
  Eigen::MatrixXd Y(n, static_cast<Eigen::Index>(count));
  Eigen::Index col = 0;
  for (const auto& t : trajs) {
    if (t.states.size() != t.controls.size() + 1 || t.twists.size() != t.states.size())
      throw FitError("trajectory has inconsistent state/control counts");
    for (std::size_t i = 0; i < t.transitions(); ++i, ++col) {
      X.col(col) = stacked(kind, t.states[i], t.twists[i], t.controls[i]);
      Y.col(col) = lift_state(kind, t.states[i + 1], t.twists[i + 1]);
    }
  }
  if (!X.allFinite() || !Y.allFinite()) throw FitError("dataset contains non-finite values");

  const double scale = 1.0 / static_cast<double>(count);
  NormalEquations ne;
  ne.P = scale * (Y * X.transpose());
  ne.G = scale * (X * X.transpose());
  ne.transitions = count;
  return ne;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& G, double rel_cutoff) {
  // Lifted coordinates span ~10 orders of magnitude (mm^2 monomials vs rad controls);
  // equilibrate so the cutoff compares like with like.
  const Eigen::Index m = G.rows();
  Eigen::VectorXd d(m);
  for (Eigen::Index i = 0; i < m; ++i) d[i] = G(i, i) > 0.0 ? 1.0 / std::sqrt(G(i, i)) : 0.0;
  const Eigen::MatrixXd Gs = d.asDiagonal() * G * d.asDiagonal();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Gs, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = rel_cutoff * (sv.size() > 0 ? sv[0] : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
  const Eigen::MatrixXd Gs_pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return d.asDiagonal() * Gs_pinv * d.asDiagonal();
}

KoopmanModel fit(std::span<const Trajectory> trajs, LiftKind kind) {
  const NormalEquations ne = accumulate(trajs, kind);
  const Eigen::MatrixXd KL = ne.P * pseudo_inverse(ne.G);
  const int n = lift_dim(kind);

  KoopmanModel model;
  model.K = KL.leftCols(n);
  model.L = KL.rightCols(kControlDim);
  model.lift = kind;
  model.provenance.transitions = ne.transitions;
  model.provenance.source_trajectories = trajs.size();
  if (!model.K.allFinite() || !model.L.allFinite()) throw FitError("fit produced non-finite entries");
  return model;
}

double one_step_loss(const Eigen::MatrixXd& KL, std::span<const Trajectory> trajs, LiftKind kind) {
  double loss = 0.0;
  for (const auto& t : trajs)
    for (std::size_t i = 0; i < t.transitions(); ++i) {
      const Eigen::VectorXd pred = KL * stacked(kind, t.states[i], t.twists[i], t.controls[i]);
      loss += (lift_state(kind, t.states[i + 1], t.twists[i + 1]) - pred).squaredNorm();
    }
  return loss;
}

Eigen::VectorXd predict_one_step(const KoopmanModel& model, const WireState& state, TwistAngle twist,
                                 const ControlCommand& u) {
  return model.K * lift_state(model.lift, state, twist) + model.L * u.vec();
}

std::vector<Eigen::VectorXd> predict_rollout(const KoopmanModel& model, const WireState& state,
                                             TwistAngle twist, std::span<const ControlCommand> controls) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(controls.size() + 1);
  out.push_back(lift_state(model.lift, state, twist));
  for (const auto& u : controls) out.push_back(model.K * out.back() + model.L * u.vec());
  return out;
}

}  // namespace wireharness::koopman
