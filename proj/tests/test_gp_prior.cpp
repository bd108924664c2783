#include <gtest/gtest.h>

#include <random>

#include "mvo/gp_prior.hpp"
#include "test_utils.hpp"

using namespace mvo;
using mvo::testing::random_twist;

namespace {

// A screw trajectory with constant acceleration along a fixed axis; the
// commuting case on which the constant-acceleration prior is exact.
struct ScrewTruth {
  Vec6 axis;
  double w0;
  double a0;
  Pose pose(double t) const {
    return exp_map((w0 * t + 0.5 * a0 * t * t) * axis);
  }
  Vec6 velocity(double t) const { return (w0 + a0 * t) * axis; }
  Vec6 acceleration() const { return a0 * axis; }
};

}  // namespace

TEST(GpPrior, TransitionShape) {
  MatX phi2 = gp_transition(0.1, 2);
  EXPECT_EQ(phi2.rows(), 12);
  EXPECT_LT((phi2.block<6, 6>(0, 6) - 0.1 * Mat6::Identity()).norm(), 1e-15);
  MatX phi3 = gp_transition(0.2, 3);
  EXPECT_EQ(phi3.rows(), 18);
  EXPECT_LT((phi3.block<6, 6>(0, 12) - 0.02 * Mat6::Identity()).norm(), 1e-15);
  EXPECT_LT((phi3.block<6, 6>(6, 12) - 0.2 * Mat6::Identity()).norm(), 1e-15);
}

TEST(GpPrior, CovarianceTimesInverseIsIdentity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> qc_draw(0.2, 3.0);
  for (double dt : {0.05, 0.1, 1.0}) {
    for (int blocks : {2, 3}) {
      Vec6 qc_diag;
      for (int i = 0; i < 6; ++i) qc_diag(i) = qc_draw(rng);
      Mat6 qc = qc_diag.asDiagonal();
      Mat6 qc_inv = qc_diag.cwiseInverse().asDiagonal();
      MatX q = gp_covariance(dt, qc, blocks);
      MatX qi = gp_covariance_inverse(dt, qc_inv, blocks);
      MatX eye = MatX::Identity(6 * blocks, 6 * blocks);
      EXPECT_LT((q * qi - eye).cwiseAbs().maxCoeff(), 1e-8)
          << "dt=" << dt << " blocks=" << blocks;
    }
  }
}

TEST(GpPrior, ResidualZeroOnConstantVelocity) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    Vec6 w = random_twist(rng, 0.8);
    double dt = 0.1;
    GpState from{exp_map(random_twist(rng, 0.5)), w, Vec6::Zero()};
    GpState to{exp_map(dt * w) * from.pose, w, Vec6::Zero()};
    auto res = gp_prior_residual(from, to, dt, 2,
                                 InvJacobianMode::kFirstOrder, false);
    EXPECT_LT(res.error.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GpPrior, ResidualZeroOnConstantAccelerationScrew) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    Vec6 axis = random_twist(rng, 1.0).normalized();
    ScrewTruth truth{axis, 0.6, 0.4};
    double dt = 0.1;
    double t0 = 0.3;
    GpState from{truth.pose(t0), truth.velocity(t0), truth.acceleration()};
    GpState to{truth.pose(t0 + dt), truth.velocity(t0 + dt),
               truth.acceleration()};
    auto res = gp_prior_residual(from, to, dt, 3,
                                 InvJacobianMode::kFirstOrder, false);
    EXPECT_LT(res.error.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(GpPrior, ResidualNonzeroOnVelocityChange) {
  GpState from{Pose(), Vec6::Ones(), Vec6::Zero()};
  GpState to{exp_map(Vec6(0.1 * Vec6::Ones())), Vec6(2.0 * Vec6::Ones()),
             Vec6::Zero()};
  auto res =
      gp_prior_residual(from, to, 0.1, 2, InvJacobianMode::kFirstOrder, false);
  EXPECT_GT(res.error.cwiseAbs().maxCoeff(), 0.5);
}

TEST(GpPrior, JacobianMatchesFiniteDifferences) {
  // This is also run by the diagnostics suite; keep a direct spot check.
  std::mt19937_64 rng(11);
  for (int blocks : {2, 3}) {
    for (int i = 0; i < 25; ++i) {
      GpState from{exp_map(random_twist(rng, 0.5)), random_twist(rng),
                   blocks >= 3 ? random_twist(rng) : Vec6::Zero()};
      GpState to{exp_map(random_twist(rng, 0.4)) * from.pose,
                 random_twist(rng),
                 blocks >= 3 ? random_twist(rng) : Vec6::Zero()};
      double dt = 0.1;
      auto res = gp_prior_residual(from, to, dt, blocks,
                                   InvJacobianMode::kFirstOrder, true);
      const double h = 1e-6;
      for (int c = 0; c < 12 * blocks; ++c) {
        auto eval = [&](double step) {
          GpState f = from, t = to;
          GpState& target = c < 6 * blocks ? f : t;
          int block = (c % (6 * blocks)) / 6;
          Vec6 d = Vec6::Zero();
          d(c % 6) = step;
          if (block == 0) {
            target.pose = exp_map(d) * target.pose;
          } else if (block == 1) {
            target.velocity += d;
          } else {
            target.acceleration += d;
          }
          return gp_prior_residual(f, t, dt, blocks,
                                   InvJacobianMode::kFirstOrder, false)
              .error;
        };
        VecX numeric = (eval(h) - eval(-h)) / (2.0 * h);
        EXPECT_LT((res.jacobian.col(c) - numeric).cwiseAbs().maxCoeff(),
                  1e-4 * std::max(1.0, numeric.cwiseAbs().maxCoeff()))
            << "blocks=" << blocks << " col=" << c;
      }
    }
  }
}

TEST(GpPrior, ExtrapolationHoldsPoseWithZeroVelocity) {
  GpState state{exp_map(Vec6::Ones() * 0.2), Vec6::Zero(), Vec6::Zero()};
  for (double dt : {0.1, 1.0, 5.0}) {
    GpState out = gp_extrapolate(state, dt, 3);
    EXPECT_TRUE(out.pose.is_approx(state.pose, 1e-15));
  }
}

TEST(GpPrior, ConstantVelocityExtrapolationIsExact) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 30; ++i) {
    Vec6 w = random_twist(rng, 0.6);
    Pose start = exp_map(random_twist(rng, 0.4));
    GpState state{start, w, Vec6::Zero()};
    for (int frames = 1; frames <= 10; ++frames) {
      double tau = 0.1 * frames;
      GpState out = gp_extrapolate(state, tau, 2);
      Pose expected = exp_map(tau * w) * start;
      EXPECT_LT((out.pose.matrix() - expected.matrix()).cwiseAbs().maxCoeff(),
                1e-8);
      EXPECT_LT((out.velocity - w).norm(), 1e-12);
    }
  }
}

TEST(GpPrior, ConstantAccelerationExtrapolationExactOnScrew) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 30; ++i) {
    Vec6 axis = random_twist(rng, 1.0).normalized();
    ScrewTruth truth{axis, 0.5, 0.3};
    GpState state{truth.pose(0.0), truth.velocity(0.0), truth.acceleration()};
    double tau = 1.0;  // 10 frames at 0.1 s
    GpState wnoj = gp_extrapolate(state, tau, 3);
    EXPECT_LT(
        (wnoj.pose.matrix() - truth.pose(tau).matrix()).cwiseAbs().maxCoeff(),
        1e-6);
    // The constant-velocity model drifts quadratically on the same truth.
    GpState wnoa = gp_extrapolate(state, tau, 2);
    double drift =
        (wnoa.pose.matrix() - truth.pose(tau).matrix()).cwiseAbs().maxCoeff();
    EXPECT_GT(drift, 1e-3);
    GpState wnoa_half = gp_extrapolate(state, tau / 2, 2);
    double drift_half = (wnoa_half.pose.matrix() -
                         truth.pose(tau / 2).matrix())
                            .cwiseAbs()
                            .maxCoeff();
    EXPECT_NEAR(drift / drift_half, 4.0, 1.2);
  }
}

TEST(GpPrior, InterpolationBoundariesAreBitExact) {
  std::mt19937_64 rng(19);
  GpState a{exp_map(random_twist(rng, 0.5)), random_twist(rng),
            random_twist(rng)};
  GpState b{exp_map(random_twist(rng, 0.5)) * a.pose, random_twist(rng),
            random_twist(rng)};
  Mat6 qc = Mat6::Identity();
  for (int blocks : {2, 3}) {
    GpState at_a = gp_interpolate(a, b, 0.0, 1.0, 0.0, blocks, qc,
                                  InvJacobianMode::kFirstOrder);
    GpState at_b = gp_interpolate(a, b, 0.0, 1.0, 1.0, blocks, qc,
                                  InvJacobianMode::kFirstOrder);
    EXPECT_EQ(at_a.pose.matrix(), a.pose.matrix());
    EXPECT_EQ(at_a.velocity, a.velocity);
    EXPECT_EQ(at_b.pose.matrix(), b.pose.matrix());
    EXPECT_EQ(at_b.velocity, b.velocity);
  }
}

TEST(GpPrior, MidpointExactOnConstantVelocityAllFlavors) {
  std::mt19937_64 rng(23);
  Vec6 w = random_twist(rng, 0.5);
  Pose start = exp_map(random_twist(rng, 0.3));
  GpState a{start, w, Vec6::Zero()};
  GpState b{exp_map(1.0 * w) * start, w, Vec6::Zero()};
  Pose expected = exp_map(0.5 * w) * start;
  Mat6 qc = Mat6::Identity();

  Pose pose_only = pose_only_interpolate(a.pose, b.pose, 0.0, 1.0, 0.5);
  EXPECT_LT((pose_only.matrix() - expected.matrix()).cwiseAbs().maxCoeff(),
            1e-10);
  for (int blocks : {2, 3}) {
    GpState mid = gp_interpolate(a, b, 0.0, 1.0, 0.5, blocks, qc,
                                 InvJacobianMode::kFirstOrder);
    EXPECT_LT((mid.pose.matrix() - expected.matrix()).cwiseAbs().maxCoeff(),
              1e-10)
        << "blocks=" << blocks;
  }
}

TEST(GpPrior, AccelerationMidpointOrdering) {
  // Constant-acceleration screw: the jerk prior interpolates the midpoint
  // strictly better than the acceleration prior.
  std::mt19937_64 rng(29);
  Mat6 qc = Mat6::Identity();
  for (int i = 0; i < 20; ++i) {
    Vec6 axis = random_twist(rng, 1.0).normalized();
    ScrewTruth truth{axis, 0.4, 0.6};
    double t0 = 0.0, t1 = 1.0, tau = 0.5;
    GpState a{truth.pose(t0), truth.velocity(t0), truth.acceleration()};
    GpState b{truth.pose(t1), truth.velocity(t1), truth.acceleration()};
    Pose expected = truth.pose(tau);

    GpState wnoa = gp_interpolate(a, b, t0, t1, tau, 2, qc,
                                  InvJacobianMode::kFirstOrder);
    GpState wnoj = gp_interpolate(a, b, t0, t1, tau, 3, qc,
                                  InvJacobianMode::kFirstOrder);
    double err_wnoa =
        (wnoa.pose.matrix() - expected.matrix()).cwiseAbs().maxCoeff();
    double err_wnoj =
        (wnoj.pose.matrix() - expected.matrix()).cwiseAbs().maxCoeff();
    EXPECT_LT(err_wnoj, err_wnoa);
    EXPECT_LT(err_wnoj, 1e-8);
  }
}

TEST(GpPrior, FlavorNamesRoundTrip) {
  for (Flavor f : {Flavor::kPoseOnly, Flavor::kPoseVelocity,
                   Flavor::kPoseVelocityAccel}) {
    EXPECT_EQ(parse_flavor(flavor_name(f)), f);
  }
  EXPECT_EQ(parse_flavor("wnoa"), Flavor::kPoseVelocity);
  EXPECT_EQ(parse_flavor("wnoj"), Flavor::kPoseVelocityAccel);
  EXPECT_THROW(parse_flavor("nope"), Error);
}
