#include <gtest/gtest.h>

#include "mvo/se3.hpp"
#include "test_utils.hpp"

using namespace mvo;
using mvo::testing::matrix_exp_series;
using mvo::testing::random_twist;

TEST(Se3, WedgeZeroTwistIsZeroMatrix) {
  EXPECT_EQ(wedge(Vec6::Zero()), Mat4::Zero());
}

TEST(Se3, WedgePureRotationHasSkewBlock) {
  Vec6 xi = Vec6::Zero();
  xi(5) = 0.7;
  Mat4 m = wedge(xi);
  Mat3 expected = skew(Vec3(0, 0, 0.7));
  EXPECT_LT((m.topLeftCorner<3, 3>() - expected).norm(), 1e-15);
  EXPECT_LT(m.topRightCorner<3, 1>().norm(), 1e-15);
  EXPECT_LT(m.row(3).norm(), 1e-15);
}

TEST(Se3, VeeInvertsWedge) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    Vec6 xi = random_twist(rng, 2.0);
    EXPECT_LT((vee(wedge(xi)) - xi).norm(), 1e-15);
  }
}

TEST(Se3, ExpOfZeroIsIdentity) {
  EXPECT_TRUE(exp_map(Vec6::Zero()).is_approx(Pose(), 1e-15));
}

TEST(Se3, ExpMatchesSeriesOracle) {
  // 90 degree z-rotation and random twists against the 4x4 series oracle.
  Vec6 quarter = Vec6::Zero();
  quarter(5) = M_PI / 2.0;
  Mat4 oracle = matrix_exp_series(Mat4(wedge(quarter)));
  EXPECT_LT((exp_map(quarter).matrix() - oracle).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(exp_map(quarter).translation().norm(), 1e-12);

  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    Vec6 xi = random_twist(rng, 1.5);
    Mat4 expected = matrix_exp_series(Mat4(wedge(xi)));
    EXPECT_LT((exp_map(xi).matrix() - expected).cwiseAbs().maxCoeff(), 1e-11);
  }
}

TEST(Se3, LogInvertsExpBelowPi) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    Vec6 xi = random_twist(rng, 1.0);
    // Keep the rotation magnitude below 3 as well as inside the principal
    // branch.
    xi.tail<3>() = xi.tail<3>().normalized() *
                   std::min(xi.tail<3>().norm() * 3.0, 3.0);
    Twist back = log_map(exp_map(xi));
    EXPECT_LT((back - xi).norm(), 1e-9) << "round trip failed at " << i;
  }
}

TEST(Se3, ExpLogRoundTripNearPi) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    Vec6 xi = random_twist(rng, 1.0);
    xi.tail<3>() = xi.tail<3>().normalized() * (M_PI - 0.1);
    EXPECT_LT((log_map(exp_map(xi)) - xi).norm(), 1e-9);
  }
}

TEST(Se3, LogAtPiThrows) {
  Vec6 xi = Vec6::Zero();
  xi(3) = M_PI;
  EXPECT_THROW(log_map(exp_map(xi)), GeometryError);
}

TEST(Se3, AdjointOfIdentity) {
  EXPECT_LT((adjoint(Pose()) - Mat6::Identity()).norm(), 1e-15);
}

TEST(Se3, AdjointBlockwise) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 50; ++i) {
    Pose t = exp_map(random_twist(rng, 1.2));
    Mat6 ad = adjoint(t);
    Mat3 c = t.rotation();
    EXPECT_LT((ad.topLeftCorner<3, 3>() - c).norm(), 1e-14);
    EXPECT_LT((ad.bottomRightCorner<3, 3>() - c).norm(), 1e-14);
    EXPECT_LT((ad.topRightCorner<3, 3>() - skew(t.translation()) * c).norm(),
              1e-14);
    EXPECT_LT(ad.bottomLeftCorner<3, 3>().norm(), 1e-15);
  }
}

TEST(Se3, AdjointEqualsExpOfCurlywedge) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    Vec6 xi = random_twist(rng, 1.0);
    Mat6 via_series = matrix_exp_series(Mat6(curlywedge(xi)));
    EXPECT_LT((adjoint(exp_map(xi)) - via_series).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Se3, AdjointIsHomomorphism) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 100; ++i) {
    Pose a = exp_map(random_twist(rng));
    Pose b = exp_map(random_twist(rng));
    EXPECT_LT((adjoint(a * b) - adjoint(a) * adjoint(b)).cwiseAbs().maxCoeff(),
              1e-8);
  }
}

TEST(Se3, InvLeftJacobianAtZeroIsIdentity) {
  EXPECT_EQ(inv_left_jacobian(Vec6::Zero()), Mat6::Identity());
  EXPECT_LT((inv_left_jacobian(Vec6::Zero(), InvJacobianMode::kSeries) -
             Mat6::Identity())
                .norm(),
            1e-12);
}

TEST(Se3, FirstOrderInvJacobianErrorIsQuadratic) {
  // Error against the series inverse shrinks ~4x when the twist halves.
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    Vec6 xi = random_twist(rng, 0.2);
    auto err = [&](const Vec6& x) {
      return (inv_left_jacobian(x, InvJacobianMode::kFirstOrder) -
              inv_left_jacobian(x, InvJacobianMode::kSeries))
          .cwiseAbs()
          .maxCoeff();
    };
    double e1 = err(xi);
    double e2 = err(Vec6(0.5 * xi));
    ASSERT_GT(e1, 0.0);
    EXPECT_NEAR(e1 / e2, 4.0, 0.8);
  }
}

TEST(Se3, SeriesInverseTimesSeriesJacobianIsIdentity) {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 100; ++i) {
    Vec6 xi = random_twist(rng, 1.2);
    // Independent series evaluation of the left Jacobian.
    Mat6 term = Mat6::Identity();
    Mat6 series = Mat6::Identity();
    Mat6 cw = curlywedge(xi);
    for (int n = 1; n < 25; ++n) {
      term = term * cw / static_cast<double>(n + 1);
      series += term;
    }
    Mat6 product = inv_left_jacobian(xi, InvJacobianMode::kSeries) * series;
    EXPECT_LT((product - Mat6::Identity()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Se3, OdotOfUnitHomogeneous) {
  Mat46 m = odot(Vec4(0, 0, 0, 1));
  EXPECT_LT((m.topLeftCorner<3, 3>() - Mat3::Identity()).norm(), 1e-15);
  EXPECT_LT(m.topRightCorner<3, 3>().norm(), 1e-15);
  EXPECT_LT(m.row(3).norm(), 1e-15);
}

TEST(Se3, OdotSwapsWedgeAction) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 100; ++i) {
    Vec6 xi = random_twist(rng, 2.0);
    Vec4 h;
    h << mvo::testing::random_vec3(rng, 3.0), 0.7;
    EXPECT_LT((wedge(xi) * h - odot(h) * xi).norm(), 1e-12);
  }
}

TEST(Se3, OdotOfDirectionVector) {
  Mat46 m = odot(Vec4(1, 2, 3, 0));
  EXPECT_LT(m.topLeftCorner<3, 3>().norm(), 1e-15);
  EXPECT_LT((m.topRightCorner<3, 3>() - skew(Vec3(-1, -2, -3))).norm(), 1e-15);
}

TEST(Se3, GroupClosureOverLongChains) {
  // 1000 raw matrix products stay orthonormal without renormalization.
  std::mt19937_64 rng(43);
  Mat4 product = Mat4::Identity();
  for (int i = 0; i < 1000; ++i) {
    product = product * exp_map(random_twist(rng, 0.3)).matrix();
  }
  Mat3 c = product.topLeftCorner<3, 3>();
  EXPECT_LT((c.transpose() * c - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Se3, PoseChainRenormalizes) {
  std::mt19937_64 rng(47);
  Pose product;
  for (int i = 0; i < 500; ++i) {
    product = product * exp_map(random_twist(rng, 0.3));
  }
  EXPECT_LE(product.chain_length(), Pose::kRenormalizeChain);
  EXPECT_LT(product.orthonormality_error(), 1e-12);
}

TEST(Se3, PoseRejectsInvalidMatrices) {
  Mat4 bad = Mat4::Identity();
  bad(0, 0) = 2.0;
  EXPECT_THROW(Pose{bad}, GeometryError);
  Mat4 bad_row = Mat4::Identity();
  bad_row(3, 0) = 0.5;
  EXPECT_THROW(Pose{bad_row}, GeometryError);
}
