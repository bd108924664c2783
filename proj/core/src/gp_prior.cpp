#include "mvo/gp_prior.hpp"

#include <cmath>

namespace mvo {

int prior_order(Flavor flavor) {
  switch (flavor) {
    case Flavor::kPoseOnly: return 1;
    case Flavor::kPoseVelocity: return 2;
    case Flavor::kPoseVelocityAccel: return 3;
  }
  throw Error("prior_order: invalid flavor");
}

Flavor parse_flavor(const std::string& name) {
  if (name == "pose-only") return Flavor::kPoseOnly;
  if (name == "pose-velocity" || name == "wnoa") return Flavor::kPoseVelocity;
  if (name == "pose-velocity-acceleration" || name == "wnoj") {
    return Flavor::kPoseVelocityAccel;
  }
  throw Error("parse_flavor: unknown estimator '" + name + "'");
}

std::string flavor_name(Flavor flavor) {
  switch (flavor) {
    case Flavor::kPoseOnly: return "pose-only";
    case Flavor::kPoseVelocity: return "pose-velocity";
    case Flavor::kPoseVelocityAccel: return "pose-velocity-acceleration";
  }
  throw Error("flavor_name: invalid flavor");
}

MatX gp_transition(double dt, int blocks) {
  MatX phi = MatX::Identity(6 * blocks, 6 * blocks);
  double factor = 1.0;
  for (int off = 1; off < blocks; ++off) {
    factor *= dt / static_cast<double>(off);  // dt^off / off!
    for (int row = 0; row + off < blocks; ++row) {
      phi.block<6, 6>(6 * row, 6 * (row + off)) =
          factor * Mat6::Identity();
    }
  }
  return phi;
}

MatX gp_covariance(double dt, const Mat6& qc, int blocks) {
  MatX q = MatX::Zero(6 * blocks, 6 * blocks);
  if (blocks == 2) {
    q.block<6, 6>(0, 0) = std::pow(dt, 3) / 3.0 * qc;
    q.block<6, 6>(0, 6) = std::pow(dt, 2) / 2.0 * qc;
    q.block<6, 6>(6, 0) = std::pow(dt, 2) / 2.0 * qc;
    q.block<6, 6>(6, 6) = dt * qc;
  } else if (blocks == 3) {
    q.block<6, 6>(0, 0) = std::pow(dt, 5) / 20.0 * qc;
    q.block<6, 6>(0, 6) = std::pow(dt, 4) / 8.0 * qc;
    q.block<6, 6>(0, 12) = std::pow(dt, 3) / 6.0 * qc;
    q.block<6, 6>(6, 0) = std::pow(dt, 4) / 8.0 * qc;
    q.block<6, 6>(6, 6) = std::pow(dt, 3) / 3.0 * qc;
    q.block<6, 6>(6, 12) = std::pow(dt, 2) / 2.0 * qc;
    q.block<6, 6>(12, 0) = std::pow(dt, 3) / 6.0 * qc;
    q.block<6, 6>(12, 6) = std::pow(dt, 2) / 2.0 * qc;
    q.block<6, 6>(12, 12) = dt * qc;
  } else {
    throw Error("gp_covariance: prior requires 2 or 3 blocks");
  }
  return q;
}

MatX gp_covariance_inverse(double dt, const Mat6& qc_inv, int blocks) {
  MatX qi = MatX::Zero(6 * blocks, 6 * blocks);
  if (blocks == 2) {
    qi.block<6, 6>(0, 0) = 12.0 * std::pow(dt, -3) * qc_inv;
    qi.block<6, 6>(0, 6) = -6.0 * std::pow(dt, -2) * qc_inv;
    qi.block<6, 6>(6, 0) = -6.0 * std::pow(dt, -2) * qc_inv;
    qi.block<6, 6>(6, 6) = 4.0 / dt * qc_inv;
  } else if (blocks == 3) {
    qi.block<6, 6>(0, 0) = 720.0 * std::pow(dt, -5) * qc_inv;
    qi.block<6, 6>(0, 6) = -360.0 * std::pow(dt, -4) * qc_inv;
    qi.block<6, 6>(0, 12) = 60.0 * std::pow(dt, -3) * qc_inv;
    qi.block<6, 6>(6, 0) = -360.0 * std::pow(dt, -4) * qc_inv;
    qi.block<6, 6>(6, 6) = 192.0 * std::pow(dt, -3) * qc_inv;
    qi.block<6, 6>(6, 12) = -36.0 * std::pow(dt, -2) * qc_inv;
    qi.block<6, 6>(12, 0) = 60.0 * std::pow(dt, -3) * qc_inv;
    qi.block<6, 6>(12, 6) = -36.0 * std::pow(dt, -2) * qc_inv;
    qi.block<6, 6>(12, 12) = 9.0 / dt * qc_inv;
  } else {
    throw Error("gp_covariance_inverse: prior requires 2 or 3 blocks");
  }
  return qi;
}

VecX gp_local_state(const Pose& anchor, const GpState& state, int blocks,
                    InvJacobianMode jmode) {
  VecX gamma = VecX::Zero(6 * blocks);
  Twist xi = (state.pose * anchor.inverse()).log();
  Mat6 jinv = inv_left_jacobian(xi, jmode);
  gamma.segment<6>(0) = xi;
  if (blocks >= 2) {
    gamma.segment<6>(6) = jinv * state.velocity;
  }
  if (blocks >= 3) {
    Vec6 jw = jinv * state.velocity;
    gamma.segment<6>(12) =
        -0.5 * curlywedge(jw) * state.velocity + jinv * state.acceleration;
  }
  return gamma;
}

GpPriorResidual gp_prior_residual(const GpState& from, const GpState& to,
                                  double dt, int blocks, InvJacobianMode jmode,
                                  bool with_jacobian) {
  GpPriorResidual out;
  const int dim = 6 * blocks;

  VecX gamma_from = VecX::Zero(dim);
  if (blocks >= 2) gamma_from.segment<6>(6) = from.velocity;
  if (blocks >= 3) gamma_from.segment<6>(12) = from.acceleration;

  VecX predicted = gp_transition(dt, blocks) * gamma_from;
  VecX actual = gp_local_state(from.pose, to, blocks, jmode);
  out.error = predicted - actual;

  if (!with_jacobian) return out;

  Pose rel = to.pose * from.pose.inverse();
  Twist xi = rel.log();
  Mat6 ad = rel.adjoint();
  // Exact derivative of the log perturbation; the error definition itself
  // uses `jmode`.
  Mat6 je = inv_left_jacobian(xi, InvJacobianMode::kSeries);
  Mat6 ja = inv_left_jacobian(xi, jmode);
  Mat6 je_ad = je * ad;
  Vec6 w = to.velocity;
  Vec6 dw = to.acceleration;

  MatX jac = MatX::Zero(dim, 2 * dim);
  auto col_from = [&](int block) { return 6 * block; };
  auto col_to = [&](int block) { return dim + 6 * block; };

  // Pose row: e1 = dt*w_k (+ dt^2/2*a_k) - xi.
  jac.block<6, 6>(0, col_from(0)) = je_ad;
  jac.block<6, 6>(0, col_to(0)) = -je;
  if (blocks >= 2) jac.block<6, 6>(0, col_from(1)) = dt * Mat6::Identity();
  if (blocks >= 3) {
    jac.block<6, 6>(0, col_from(2)) = 0.5 * dt * dt * Mat6::Identity();
  }

  if (blocks >= 2) {
    // Velocity row: e2 = w_k (+ dt*a_k) - Ja^-1 w_{k+1}.
    Mat6 wc = curlywedge(w);
    jac.block<6, 6>(6, col_from(0)) = 0.5 * wc * je_ad;
    jac.block<6, 6>(6, col_from(1)) = Mat6::Identity();
    jac.block<6, 6>(6, col_to(0)) = -0.5 * wc * je;
    jac.block<6, 6>(6, col_to(1)) = -ja;
    if (blocks >= 3) jac.block<6, 6>(6, col_from(2)) = dt * Mat6::Identity();
  }

  if (blocks >= 3) {
    // Acceleration row: e3 = a_k + 1/2 (Ja^-1 w)^curly w - Ja^-1 a_{k+1}.
    Mat6 wc = curlywedge(w);
    Mat6 coupling = 0.25 * wc * wc + 0.5 * curlywedge(dw);
    jac.block<6, 6>(12, col_from(0)) = coupling * je_ad;
    jac.block<6, 6>(12, col_from(2)) = Mat6::Identity();
    jac.block<6, 6>(12, col_to(0)) = -coupling * je;
    jac.block<6, 6>(12, col_to(1)) =
        0.5 * curlywedge(ja * w) - 0.5 * wc * ja;
    jac.block<6, 6>(12, col_to(2)) = -ja;
  }

  out.jacobian = std::move(jac);
  return out;
}

namespace {

GpState lift_local(const VecX& gamma, const Pose& anchor, int blocks) {
  GpState out;
  out.pose = exp_map(gamma.segment<6>(0)) * anchor;
  if (blocks >= 2) out.velocity = gamma.segment<6>(6);
  if (blocks >= 3) out.acceleration = gamma.segment<6>(12);
  return out;
}

}  // namespace

GpState gp_extrapolate(const GpState& state, double dt, int blocks) {
  VecX gamma = VecX::Zero(6 * blocks);
  if (blocks >= 2) gamma.segment<6>(6) = state.velocity;
  if (blocks >= 3) gamma.segment<6>(12) = state.acceleration;
  return lift_local(gp_transition(dt, blocks) * gamma, state.pose, blocks);
}

GpState gp_interpolate(const GpState& at_tj, const GpState& at_tk, double t_j,
                       double t_k, double tau, int blocks, const Mat6& qc,
                       InvJacobianMode jmode) {
  if (tau == t_j) return at_tj;
  if (tau == t_k) return at_tk;
  if (!(t_j < tau && tau < t_k)) {
    throw Error("gp_interpolate: tau must lie inside [t_j, t_k]");
  }
  VecX gamma_j = VecX::Zero(6 * blocks);
  if (blocks >= 2) gamma_j.segment<6>(6) = at_tj.velocity;
  if (blocks >= 3) gamma_j.segment<6>(12) = at_tj.acceleration;
  VecX gamma_k = gp_local_state(at_tj.pose, at_tk, blocks, jmode);

  Mat6 qc_inv = qc.inverse();
  MatX omega = gp_covariance(tau - t_j, qc, blocks) *
               gp_transition(t_k - tau, blocks).transpose() *
               gp_covariance_inverse(t_k - t_j, qc_inv, blocks);
  MatX lambda =
      gp_transition(tau - t_j, blocks) - omega * gp_transition(t_k - t_j, blocks);

  VecX gamma = lambda * gamma_j + omega * gamma_k;
  return lift_local(gamma, at_tj.pose, blocks);
}

Pose pose_only_interpolate(const Pose& at_tj, const Pose& at_tk, double t_j,
                           double t_k, double tau) {
  if (tau == t_j) return at_tj;
  if (tau == t_k) return at_tk;
  Twist xi = (at_tk * at_tj.inverse()).log();
  double s = (tau - t_j) / (t_k - t_j);
  return exp_map(s * xi) * at_tj;
}

}  // namespace mvo
