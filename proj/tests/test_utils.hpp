#pragma once

// Shared helpers for the unit and acceptance suites: independent numerical
// oracles (series matrix exponential) and random-state generators. These stay
// independent of the closed-form implementations they are used to check.

#include <random>

#include "mvo/scene.hpp"
#include "mvo/se3.hpp"
#include "mvo/types.hpp"

namespace mvo::testing {

/// Taylor-series matrix exponential with scaling and squaring; the oracle
/// for the closed-form exponential maps.
template <typename Matrix>
Matrix matrix_exp_series(const Matrix& a) {
  double norm = a.cwiseAbs().maxCoeff();
  int squarings = 0;
  Matrix scaled = a;
  while (norm > 0.5) {
    scaled /= 2.0;
    norm /= 2.0;
    ++squarings;
  }
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int n = 1; n <= 30; ++n) {
    term = term * scaled / static_cast<double>(n);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

inline Vec6 random_twist(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec6 xi;
  for (int i = 0; i < 6; ++i) xi(i) = scale * unit(rng);
  return xi;
}

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  return scale * Vec3(unit(rng), unit(rng), unit(rng));
}

inline Pose random_pose(std::mt19937_64& rng, double scale = 1.0) {
  return exp_map(random_twist(rng, scale));
}

inline StereoCalib default_calib() {
  StereoCalib calib;
  calib.f_u = 400.0;
  calib.f_v = 400.0;
  calib.u0 = 0.0;
  calib.v0 = 0.0;
  calib.b = 0.12;
  return calib;
}

/// Camera on a gentle constant-velocity path.
inline TrajectoryProgram gentle_camera() {
  TrajectoryProgram camera;
  camera.kind = ProgramKind::kConstantVelocity;
  Vec6 v;
  v << 0.05, -0.03, 0.02, 0.010, 0.015, -0.008;
  camera.velocity = v;
  return camera;
}

inline SceneBody background_body(int points, double z_center = 5.5,
                                 std::uint64_t /*seed*/ = 0) {
  SceneBody body;
  body.point_count = points;
  body.box_center = Vec3(0.0, 0.0, z_center);
  body.box_half_extent = Vec3(2.6, 1.9, 1.0);
  body.program.kind = ProgramKind::kConstantPose;
  return body;
}

inline SceneBody pendular_body(const Vec3& center, const Vec3& axis,
                               double amplitude, double period, double phase,
                               int points) {
  SceneBody body;
  body.point_count = points;
  body.box_center = Vec3::Zero();
  body.box_half_extent = Vec3(0.28, 0.28, 0.18);
  body.program.kind = ProgramKind::kPendular;
  body.program.initial = Pose::from_parts(Mat3::Identity(), center);
  body.program.axis = axis;
  body.program.hinge = center + Vec3(0.0, -1.1, 0.0);
  body.program.amplitude = amplitude;
  body.program.period = period;
  body.program.phase = phase;
  return body;
}

/// Camera plus a static backdrop and four swinging blocks; the multimotion
/// segmentation and estimation workhorse.
inline SceneScript swinging_scene(int frames, double sigma,
                                  std::uint64_t seed) {
  SceneScript script;
  script.frame_count = frames;
  script.dt = 0.1;
  script.noise_sigma = sigma;
  script.seed = seed;
  script.calib = default_calib();
  script.camera = gentle_camera();
  script.bodies.push_back(background_body(60));
  script.bodies.push_back(pendular_body(Vec3(-1.1, 0.75, 3.1),
                                        Vec3::UnitX(), 0.55, 2.2, 0.3, 60));
  script.bodies.push_back(pendular_body(Vec3(1.1, 0.75, 3.3),
                                        Vec3::UnitY(), 0.60, 2.8, 1.2, 60));
  script.bodies.push_back(pendular_body(Vec3(-1.1, -0.75, 3.2),
                                        Vec3::UnitX(), 0.50, 1.9, 2.1, 60));
  script.bodies.push_back(pendular_body(Vec3(1.1, -0.75, 3.0),
                                        Vec3::UnitZ(), 0.65, 2.5, 0.8, 60));
  return script;
}

/// Camera, static backdrop, and one constant-velocity block occluded over
/// [occlusion_start, occlusion_end].
inline SceneScript occlusion_scene(int frames, int occlusion_start,
                                   int occlusion_end, double sigma,
                                   std::uint64_t seed) {
  SceneScript script;
  script.frame_count = frames;
  script.dt = 0.1;
  script.noise_sigma = sigma;
  script.seed = seed;
  script.calib = default_calib();
  script.camera = gentle_camera();
  script.bodies.push_back(background_body(80));

  SceneBody block;
  block.point_count = 60;
  block.box_half_extent = Vec3(0.3, 0.3, 0.2);
  block.program.kind = ProgramKind::kConstantVelocity;
  block.program.initial = Pose::from_parts(Mat3::Identity(), Vec3(-1.6, 0.3, 3.0));
  Vec6 v;
  v << 0.45, 0.10, 0.06, 0.0, 0.0, 0.12;
  block.program.velocity = v;
  block.occlusions.push_back({occlusion_start, occlusion_end});
  script.bodies.push_back(block);
  return script;
}

}  // namespace mvo::testing
