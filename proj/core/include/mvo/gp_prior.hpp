#pragma once

// Constant-velocity and constant-acceleration motion priors on SE(3): state
// transitions, process covariances, prior residuals with their Jacobians, and
// extrapolation/interpolation of local states.

#include "mvo/se3.hpp"
#include "mvo/types.hpp"

namespace mvo {

enum class Flavor {
  kPoseOnly,
  kPoseVelocity,       // white-noise-on-acceleration prior
  kPoseVelocityAccel,  // white-noise-on-jerk prior
};

/// Number of 6-dof blocks in the local prior state (pose always, then
/// velocity, then acceleration). Pose-only carries no prior and reports 1.
int prior_order(Flavor flavor);

Flavor parse_flavor(const std::string& name);
std::string flavor_name(Flavor flavor);

/// Block-upper-triangular transition over dt for `blocks` 6-dof blocks.
MatX gp_transition(double dt, int blocks);

/// Process covariance Q(dt) and its closed-form inverse.
MatX gp_covariance(double dt, const Mat6& qc, int blocks);
MatX gp_covariance_inverse(double dt, const Mat6& qc_inv, int blocks);

struct GpState {
  Pose pose;
  Vec6 velocity = Vec6::Zero();      // body-centric [m/s, rad/s]
  Vec6 acceleration = Vec6::Zero();  // body-centric [m/s^2, rad/s^2]
};

/// Local coordinates of `state` about `anchor`:
///   [ log(T T_a^-1); J^-1 w; -1/2 (J^-1 w)^curly w + J^-1 dw ]
/// truncated to `blocks` rows. `jmode` selects the inverse-left-Jacobian
/// variant used inside the state definition.
VecX gp_local_state(const Pose& anchor, const GpState& state, int blocks,
                    InvJacobianMode jmode);

struct GpPriorResidual {
  VecX error;     // 6*blocks
  MatX jacobian;  // 6*blocks x 12*blocks, columns [dxi_k, dw_k, (da_k), dxi_k1, dw_k1, (da_k1)]
};

/// Residual of the transition between consecutive states, defined as
/// prediction minus actual so the Jacobian below is its exact derivative
/// (exact when jmode is kFirstOrder; the velocity-coupling blocks are
/// first-order otherwise).
GpPriorResidual gp_prior_residual(const GpState& from, const GpState& to,
                                  double dt, int blocks, InvJacobianMode jmode,
                                  bool with_jacobian);

/// Propagates [0; w; dw] forward by dt and lifts to a global state.
GpState gp_extrapolate(const GpState& state, double dt, int blocks);

/// Interpolates between two states at t_j < tau < t_k. Returns the bracketing
/// state bit-exactly at the boundaries.
GpState gp_interpolate(const GpState& at_tj, const GpState& at_tk, double t_j,
                       double t_k, double tau, int blocks, const Mat6& qc,
                       InvJacobianMode jmode);

/// Linear interpolation in algebra coordinates; strict constant velocity.
Pose pose_only_interpolate(const Pose& at_tj, const Pose& at_tk, double t_j,
                           double t_k, double tau);

}  // namespace mvo
