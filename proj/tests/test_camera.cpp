#include <gtest/gtest.h>

#include <random>

#include "mvo/camera.hpp"
#include "test_utils.hpp"

using namespace mvo;

TEST(Camera, OnAxisPoint) {
  StereoCalib calib = mvo::testing::default_calib();
  calib.b = 0.1;
  StereoObs obs = project(Vec3(0, 0, 2), calib);
  EXPECT_DOUBLE_EQ(obs.u, 0.0);
  EXPECT_DOUBLE_EQ(obs.v, 0.0);
  EXPECT_DOUBLE_EQ(obs.d, 20.0);
}

TEST(Camera, OffAxisPoint) {
  StereoCalib calib = mvo::testing::default_calib();
  calib.b = 0.1;
  StereoObs obs = project(Vec3(1, 1, 2), calib);
  EXPECT_DOUBLE_EQ(obs.u, 200.0);
  EXPECT_DOUBLE_EQ(obs.v, 200.0);
  EXPECT_DOUBLE_EQ(obs.d, 20.0);
}

TEST(Camera, PrincipalPointSignIsSelectable) {
  StereoCalib calib = mvo::testing::default_calib();
  calib.u0 = 10.0;
  calib.v0 = 20.0;
  StereoObs printed = project(Vec3(0, 0, 2), calib);
  EXPECT_DOUBLE_EQ(printed.u, -10.0);
  EXPECT_DOUBLE_EQ(printed.v, -20.0);
  calib.principal_point_sign = 1.0;
  StereoObs conventional = project(Vec3(0, 0, 2), calib);
  EXPECT_DOUBLE_EQ(conventional.u, 10.0);
  EXPECT_DOUBLE_EQ(conventional.v, 20.0);
}

TEST(Camera, BehindCameraThrows) {
  StereoCalib calib = mvo::testing::default_calib();
  EXPECT_THROW(project(Vec3(0, 0, 0.05), calib), CameraError);
  EXPECT_THROW(project(Vec3(0, 0, -1.0), calib), CameraError);
  EXPECT_FALSE(try_project(Vec3(0, 0, -1.0), calib).has_value());
}

TEST(Camera, UnprojectOnAxis) {
  StereoCalib calib = mvo::testing::default_calib();
  calib.b = 0.1;
  Vec3 p = unproject(StereoObs{0, 0, 20}, calib);
  EXPECT_LT((p - Vec3(0, 0, 2)).norm(), 1e-12);
}

TEST(Camera, UnprojectRejectsNonPositiveDisparity) {
  StereoCalib calib = mvo::testing::default_calib();
  EXPECT_THROW(unproject(StereoObs{0, 0, 0.0}, calib), CameraError);
  EXPECT_THROW(unproject(StereoObs{0, 0, -3.0}, calib), CameraError);
  // Disparity at the near-plane boundary is accepted.
  double d_max = calib.f_u * calib.b / calib.z_min;
  EXPECT_NO_THROW(unproject(StereoObs{0, 0, d_max}, calib));
}

TEST(Camera, RoundTripOnRandomObservations) {
  StereoCalib calib = mvo::testing::default_calib();
  calib.u0 = 320;
  calib.v0 = 240;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> span(-1.5, 1.5);
  std::uniform_real_distribution<double> depth(0.3, 20.0);
  for (int i = 0; i < 1000; ++i) {
    Vec3 p(span(rng), span(rng), depth(rng));
    StereoObs obs = project(p, calib);
    EXPECT_GT(obs.d, 0.0);
    EXPECT_LT((unproject(obs, calib) - p).norm(), 1e-9);
    StereoObs back = project(unproject(obs, calib), calib);
    EXPECT_NEAR(back.u, obs.u, 1e-9);
    EXPECT_NEAR(back.v, obs.v, 1e-9);
    EXPECT_NEAR(back.d, obs.d, 1e-9);
  }
}

TEST(Camera, DisparityPositivityMatchesDepth) {
  StereoCalib calib = mvo::testing::default_calib();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> depth(0.2, 30.0);
  for (int i = 0; i < 200; ++i) {
    Vec3 p(0.3, -0.2, depth(rng));
    EXPECT_GT(project(p, calib).d, 0.0);
  }
}

TEST(Camera, JacobianMatchesFiniteDifferences) {
  StereoCalib calib = mvo::testing::default_calib();
  calib.u0 = 15.0;
  calib.v0 = -7.0;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> span(-2.0, 2.0);
  std::uniform_real_distribution<double> depth(0.5, 8.0);
  std::uniform_real_distribution<double> hom(0.8, 1.2);
  for (int i = 0; i < 200; ++i) {
    Vec4 z(span(rng), span(rng), depth(rng), hom(rng));
    Mat34 analytic = projection_jacobian(z, calib);
    Mat34 numeric;
    for (int c = 0; c < 4; ++c) {
      double h = 1e-6 * std::max(1.0, std::abs(z(c)));
      Vec4 hi = z, lo = z;
      hi(c) += h;
      lo(c) -= h;
      numeric.col(c) =
          (project_homogeneous(hi, calib) - project_homogeneous(lo, calib)) /
          (2.0 * h);
    }
    EXPECT_LT((analytic - numeric).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Camera, JacobianClosedFormEntries) {
  StereoCalib calib = mvo::testing::default_calib();
  calib.b = 0.1;
  Mat34 s = projection_jacobian(Vec4(0, 0, 2, 1), calib);
  EXPECT_DOUBLE_EQ(s(0, 0), calib.f_u / 2.0);
  // Third row involves only the depth and homogeneous columns.
  EXPECT_DOUBLE_EQ(s(2, 0), 0.0);
  EXPECT_DOUBLE_EQ(s(2, 1), 0.0);
  EXPECT_NE(s(2, 2), 0.0);
  EXPECT_NE(s(2, 3), 0.0);
}

TEST(Camera, CalibFileRoundTrip) {
  StereoCalib calib = mvo::testing::default_calib();
  calib.u0 = 321.5;
  calib.v0 = 239.25;
  calib.b = 0.54;
  std::string path = ::testing::TempDir() + "calib.json";
  save_calib(calib, path);
  StereoCalib loaded = load_calib(path);
  EXPECT_DOUBLE_EQ(loaded.f_u, calib.f_u);
  EXPECT_DOUBLE_EQ(loaded.u0, calib.u0);
  EXPECT_DOUBLE_EQ(loaded.b, calib.b);
  EXPECT_DOUBLE_EQ(loaded.principal_point_sign, calib.principal_point_sign);
}
