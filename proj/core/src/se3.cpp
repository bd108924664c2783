#include "mvo/se3.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace mvo {

namespace {
constexpr double kTinyAngle = 1e-12;
constexpr double kPiGuard = 1e-6;
}  // namespace

Pose::Pose(const Mat4& matrix, double tol) : matrix_(matrix) {
  Mat3 c = matrix.topLeftCorner<3, 3>();
  double ortho = (c.transpose() * c - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol || c.determinant() < 0.0) {
    throw GeometryError("Pose: rotation block is not in SO(3)");
  }
  Vec4 bottom = matrix.row(3).transpose();
  if ((bottom - Vec4(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tol) {
    throw GeometryError("Pose: bottom row is not (0,0,0,1)");
  }
  matrix_.row(3) << 0, 0, 0, 1;
}

Pose Pose::from_parts(const Mat3& rotation, const Vec3& translation) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return Pose(m, Unchecked{});
}

Pose Pose::exp(const Twist& xi) { return exp_map(xi); }

Twist Pose::log() const { return log_map(*this); }

Pose Pose::inverse() const {
  Mat3 ct = rotation().transpose();
  Pose out = from_parts(ct, -ct * translation());
  out.chain_ = chain_;
  return out;
}

Mat6 Pose::adjoint() const { return mvo::adjoint(*this); }

Pose Pose::operator*(const Pose& rhs) const {
  Pose out(Mat4(matrix_ * rhs.matrix_), Unchecked{});
  out.chain_ = chain_ + rhs.chain_ + 1;
  if (out.chain_ > kRenormalizeChain) {
    out.renormalize();
  }
  return out;
}

void Pose::renormalize() {
  Eigen::JacobiSVD<Mat3> svd(rotation(),
                             Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 s = Mat3::Identity();
  s(2, 2) = (u * v.transpose()).determinant() > 0 ? 1.0 : -1.0;
  matrix_.topLeftCorner<3, 3>() = u * s * v.transpose();
  matrix_.row(3) << 0, 0, 0, 1;
  chain_ = 0;
}

double Pose::orthonormality_error() const {
  Mat3 c = rotation();
  return (c.transpose() * c - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Vec3 unskew(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Mat4 wedge(const Twist& xi) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = skew(xi.tail<3>());
  m.topRightCorner<3, 1>() = xi.head<3>();
  return m;
}

Twist vee(const Mat4& m) {
  Twist xi;
  xi.head<3>() = m.topRightCorner<3, 1>();
  xi.tail<3>() = unskew(m.topLeftCorner<3, 3>());
  return xi;
}

Mat6 curlywedge(const Twist& xi) {
  Mat6 m = Mat6::Zero();
  Mat3 phi_hat = skew(xi.tail<3>());
  m.topLeftCorner<3, 3>() = phi_hat;
  m.topRightCorner<3, 3>() = skew(xi.head<3>());
  m.bottomRightCorner<3, 3>() = phi_hat;
  return m;
}

Mat3 so3_exp(const Vec3& phi) {
  double angle = phi.norm();
  if (angle < kTinyAngle) {
    return Mat3::Identity() + skew(phi);
  }
  Vec3 axis = phi / angle;
  Mat3 a = skew(axis);
  return Mat3::Identity() + std::sin(angle) * a +
         (1.0 - std::cos(angle)) * a * a;
}

Vec3 so3_log(const Mat3& rotation) {
  double cos_angle = 0.5 * (rotation.trace() - 1.0);
  cos_angle = std::min(1.0, std::max(-1.0, cos_angle));
  double angle = std::acos(cos_angle);
  if (angle < kTinyAngle) {
    return unskew(rotation - rotation.transpose()) * 0.5;
  }
  if (angle > M_PI - kPiGuard) {
    throw GeometryError("so3_log: rotation angle at pi, branch undefined");
  }
  return angle / (2.0 * std::sin(angle)) *
         unskew(rotation - rotation.transpose());
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  double angle = phi.norm();
  Mat3 p = skew(phi);
  if (angle < 1e-6) {
    return Mat3::Identity() + 0.5 * p + p * p / 6.0;
  }
  double a2 = angle * angle;
  return Mat3::Identity() + (1.0 - std::cos(angle)) / a2 * p +
         (angle - std::sin(angle)) / (a2 * angle) * p * p;
}

Mat3 so3_inv_left_jacobian(const Vec3& phi) {
  double angle = phi.norm();
  Mat3 p = skew(phi);
  if (angle < 1e-6) {
    return Mat3::Identity() - 0.5 * p + p * p / 12.0;
  }
  double half = 0.5 * angle;
  double cot_half = std::cos(half) / std::sin(half);
  return Mat3::Identity() - 0.5 * p +
         (1.0 - half * cot_half) / (angle * angle) * p * p;
}

Pose exp_map(const Twist& xi) {
  Vec3 phi = xi.tail<3>();
  return Pose::from_parts(so3_exp(phi), so3_left_jacobian(phi) * xi.head<3>());
}

Twist log_map(const Pose& pose) {
  Vec3 phi = so3_log(pose.rotation());
  Twist xi;
  xi.tail<3>() = phi;
  xi.head<3>() = so3_inv_left_jacobian(phi) * pose.translation();
  return xi;
}

Mat6 adjoint(const Pose& pose) {
  Mat6 m = Mat6::Zero();
  Mat3 c = pose.rotation();
  m.topLeftCorner<3, 3>() = c;
  m.topRightCorner<3, 3>() = skew(pose.translation()) * c;
  m.bottomRightCorner<3, 3>() = c;
  return m;
}

Mat6 left_jacobian(const Twist& xi) {
  // sum_{n>=0} curlywedge(xi)^n / (n+1)!
  Mat6 term = Mat6::Identity();
  Mat6 sum = Mat6::Identity();
  Mat6 cw = curlywedge(xi);
  for (int n = 1; n <= 30; ++n) {
    term = term * cw / static_cast<double>(n + 1);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-16) break;
  }
  return sum;
}

Mat6 inv_left_jacobian(const Twist& xi, InvJacobianMode mode) {
  if (mode == InvJacobianMode::kFirstOrder) {
    return Mat6::Identity() - 0.5 * curlywedge(xi);
  }
  return left_jacobian(xi).partialPivLu().inverse();
}

Mat46 odot(const Vec4& h) {
  if (!std::isfinite(h(3))) {
    throw GeometryError("odot: homogeneous component is not finite");
  }
  Mat46 m = Mat46::Zero();
  m.topLeftCorner<3, 3>() = h(3) * Mat3::Identity();
  m.topRightCorner<3, 3>() = -skew(h.head<3>());
  return m;
}

}  // namespace mvo
