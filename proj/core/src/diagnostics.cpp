#include "mvo/diagnostics.hpp"

#include <chrono>
#include <random>

#include "mvo/camera.hpp"
#include "mvo/estimator.hpp"
#include "mvo/gp_prior.hpp"
#include "mvo/se3.hpp"

namespace mvo {

namespace {

using Clock = std::chrono::steady_clock;

double block_error(const MatX& analytic, const MatX& numeric) {
  double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

Vec6 random_twist(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec6 xi;
  for (int i = 0; i < 6; ++i) xi(i) = scale * unit(rng);
  return xi;
}

Vec3 random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  return Vec3(2.0 * unit(rng), 1.5 * unit(rng), 3.0 + 1.5 * unit(rng));
}

constexpr double kStep = 1e-6;

// Central differences of the stereo projection with respect to the
// homogeneous point.
double check_projection(std::mt19937_64& rng, const StereoCalib& calib) {
  Vec3 p = random_point(rng);
  std::uniform_real_distribution<double> w(0.8, 1.2);
  Vec4 z(p.x(), p.y(), p.z(), w(rng));
  Mat34 analytic = projection_jacobian(z, calib);
  Mat34 numeric;
  for (int c = 0; c < 4; ++c) {
    Vec4 hi = z, lo = z;
    double h = kStep * std::max(1.0, std::abs(z(c)));
    hi(c) += h;
    lo(c) -= h;
    numeric.col(c) =
        (project_homogeneous(hi, calib) - project_homogeneous(lo, calib)) /
        (2.0 * h);
  }
  return block_error(analytic, numeric);
}

// Ego measurement model: e = s(T p) - y over [pose perturbation, landmark].
double check_ego_measurement(std::mt19937_64& rng, const StereoCalib& calib) {
  Pose pose = exp_map(random_twist(rng, 0.8));
  Vec3 landmark = pose.inverse() * random_point(rng);
  Vec4 p_h(landmark.x(), landmark.y(), landmark.z(), 1.0);

  auto model = [&](const Pose& T, const Vec3& p) {
    Vec4 h(p.x(), p.y(), p.z(), 1.0);
    return project_homogeneous(T * h, calib);
  };

  Vec4 z = pose * p_h;
  Mat34 s = projection_jacobian(z, calib);
  Eigen::Matrix<double, 3, 9> analytic;
  analytic.leftCols<6>() = s * odot(z);
  analytic.rightCols<3>() = s * pose.matrix().leftCols<3>();

  Eigen::Matrix<double, 3, 9> numeric;
  for (int c = 0; c < 6; ++c) {
    Vec6 d = Vec6::Zero();
    d(c) = kStep;
    numeric.col(c) = (model(exp_map(d) * pose, landmark) -
                      model(exp_map(-d) * pose, landmark)) /
                     (2.0 * kStep);
  }
  for (int c = 0; c < 3; ++c) {
    Vec3 d = Vec3::Zero();
    d(c) = kStep;
    numeric.col(6 + c) =
        (model(pose, landmark + d) - model(pose, landmark - d)) /
        (2.0 * kStep);
  }
  return block_error(analytic, numeric);
}

// Geocentric measurement model: e = s(A X^-1 B p) - y over [object pose,
// landmark].
double check_geo_measurement(std::mt19937_64& rng, const StereoCalib& calib) {
  Pose ego = exp_map(random_twist(rng, 0.5));
  Pose anchor = Pose::from_parts(Mat3::Identity(), -random_point(rng));
  Pose object = exp_map(random_twist(rng, 0.6));
  Pose prefix_a = ego * anchor.inverse();

  Vec3 probe = random_point(rng);
  Vec3 landmark = (prefix_a * object.inverse() * anchor).inverse() * probe;
  Vec4 p_h(landmark.x(), landmark.y(), landmark.z(), 1.0);

  auto model = [&](const Pose& X, const Vec3& p) {
    Vec4 h(p.x(), p.y(), p.z(), 1.0);
    return project_homogeneous(prefix_a * X.inverse() * anchor * h, calib);
  };

  Vec4 z = prefix_a * object.inverse() * anchor * p_h;
  Mat34 s = projection_jacobian(z, calib);
  Eigen::Matrix<double, 3, 9> analytic;
  analytic.leftCols<6>() =
      -s * (prefix_a * object.inverse()).matrix() * odot(anchor * p_h);
  analytic.rightCols<3>() =
      s * (prefix_a * object.inverse() * anchor).matrix().leftCols<3>();

  Eigen::Matrix<double, 3, 9> numeric;
  for (int c = 0; c < 6; ++c) {
    Vec6 d = Vec6::Zero();
    d(c) = kStep;
    numeric.col(c) = (model(exp_map(d) * object, landmark) -
                      model(exp_map(-d) * object, landmark)) /
                     (2.0 * kStep);
  }
  for (int c = 0; c < 3; ++c) {
    Vec3 d = Vec3::Zero();
    d(c) = kStep;
    numeric.col(6 + c) =
        (model(object, landmark + d) - model(object, landmark - d)) /
        (2.0 * kStep);
  }
  return block_error(analytic, numeric);
}

// Motion-prior residual Jacobian for 2 or 3 blocks.
double check_prior(std::mt19937_64& rng, int blocks) {
  GpState from{exp_map(random_twist(rng, 0.6)), random_twist(rng, 0.8),
               blocks >= 3 ? random_twist(rng, 0.8) : Vec6::Zero()};
  GpState to{exp_map(random_twist(rng, 0.4)) * from.pose,
             random_twist(rng, 0.8),
             blocks >= 3 ? random_twist(rng, 0.8) : Vec6::Zero()};
  const double dt = 0.1;
  const auto jmode = InvJacobianMode::kFirstOrder;

  auto res = gp_prior_residual(from, to, dt, blocks, jmode, true);

  auto perturbed = [&](int column, double step) {
    GpState f = from, t = to;
    int side = column / (6 * blocks);
    int block = (column % (6 * blocks)) / 6;
    int axis = column % 6;
    Vec6 d = Vec6::Zero();
    d(axis) = step;
    GpState& target = side == 0 ? f : t;
    if (block == 0) {
      target.pose = exp_map(d) * target.pose;
    } else if (block == 1) {
      target.velocity += d;
    } else {
      target.acceleration += d;
    }
    return gp_prior_residual(f, t, dt, blocks, jmode, false).error;
  };

  MatX numeric(6 * blocks, 12 * blocks);
  for (int c = 0; c < 12 * blocks; ++c) {
    numeric.col(c) =
        (perturbed(c, kStep) - perturbed(c, -kStep)) / (2.0 * kStep);
  }
  return block_error(res.jacobian, numeric);
}

}  // namespace

std::vector<JacobianCheck> run_jacobian_suite(int trials, std::uint64_t seed) {
  StereoCalib calib;
  calib.f_u = 420.0;
  calib.f_v = 410.0;
  calib.u0 = 3.0;
  calib.v0 = -2.0;
  calib.b = 0.12;

  struct Suite {
    const char* name;
    std::function<double(std::mt19937_64&)> trial;
  };
  std::vector<Suite> suites = {
      {"stereo-projection",
       [&](std::mt19937_64& rng) { return check_projection(rng, calib); }},
      {"measurement-ego",
       [&](std::mt19937_64& rng) { return check_ego_measurement(rng, calib); }},
      {"measurement-geo",
       [&](std::mt19937_64& rng) { return check_geo_measurement(rng, calib); }},
      {"prior-pose-velocity",
       [](std::mt19937_64& rng) { return check_prior(rng, 2); }},
      {"prior-pose-velocity-acceleration",
       [](std::mt19937_64& rng) { return check_prior(rng, 3); }},
  };

  std::vector<JacobianCheck> results;
  for (auto& suite : suites) {
    std::mt19937_64 rng(seed);
    auto start = Clock::now();
    JacobianCheck check;
    check.name = suite.name;
    check.trials = trials;
    for (int i = 0; i < trials; ++i) {
      check.max_relative_error =
          std::max(check.max_relative_error, suite.trial(rng));
    }
    check.seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
    results.push_back(std::move(check));
  }
  return results;
}

}  // namespace mvo
