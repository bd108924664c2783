#pragma once

// Nonlinear stereo projection model and its 3x4 Jacobian with respect to the
// homogeneous point.

#include <optional>
#include <string>

#include "mvo/types.hpp"

namespace mvo {

struct StereoCalib {
  double f_u = 400.0;  // horizontal focal length [px]
  double f_v = 400.0;  // vertical focal length [px]
  double u0 = 0.0;     // principal point [px]
  double v0 = 0.0;
  double b = 0.1;  // baseline [m]

  // Sign applied to the principal point in the projection, u = f_u*x/z +
  // principal_point_sign*u0. The conventional pinhole model uses +1; the
  // default here is -1. Selectable because both appear in the wild and the
  // synthetic scenes use u0 = v0 = 0 either way.
  double principal_point_sign = -1.0;

  double z_min = 0.1;  // near-plane cutoff [m]

  void validate() const;
};

struct StereoObs {
  double u = 0.0;
  double v = 0.0;
  double d = 0.0;  // horizontal disparity [px]
};

/// Projects a camera-frame point. Throws CameraError when z <= z_min.
StereoObs project(const Vec3& p, const StereoCalib& calib);

/// Non-throwing variant used inside residual loops.
std::optional<StereoObs> try_project(const Vec3& p, const StereoCalib& calib);

/// Projection of a homogeneous 4-vector; the disparity row reads the depth as
/// z3*z4 so that the analytic Jacobian below is its exact derivative. Along
/// every estimation path z4 == 1 and this matches project().
Vec3 project_homogeneous(const Vec4& z, const StereoCalib& calib);

/// Inverts project(). Throws CameraError when d <= 0.
Vec3 unproject(const StereoObs& obs, const StereoCalib& calib);

/// 3x4 Jacobian of project_homogeneous at z.
Mat34 projection_jacobian(const Vec4& z, const StereoCalib& calib);

/// Calibration file: JSON object {f_u, f_v, u0, v0, b} plus optional
/// principal_point_sign and z_min.
StereoCalib load_calib(const std::string& path);
void save_calib(const StereoCalib& calib, const std::string& path);

}  // namespace mvo
