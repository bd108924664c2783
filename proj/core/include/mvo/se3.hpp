#pragma once

// SE(3) / se(3) primitives used throughout the pipeline. Twists are ordered
// (rho; phi): translational block first, rotational block second.

#include "mvo/types.hpp"

namespace mvo {

using Twist = Vec6;

/// Rigid transform T = [C r; 0 1] with C in SO(3).
class Pose {
 public:
  Pose() : matrix_(Mat4::Identity()) {}

  /// Wraps a homogeneous matrix. Throws GeometryError if the rotation block
  /// is not orthonormal (det +1) to `tol` or the bottom row is not (0,0,0,1).
  explicit Pose(const Mat4& matrix, double tol = 1e-6);

  static Pose from_parts(const Mat3& rotation, const Vec3& translation);
  static Pose exp(const Twist& xi);

  const Mat4& matrix() const { return matrix_; }
  Mat3 rotation() const { return matrix_.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return matrix_.topRightCorner<3, 1>(); }

  Twist log() const;
  Pose inverse() const;
  Mat6 adjoint() const;

  Vec3 operator*(const Vec3& p) const {
    return rotation() * p + translation();
  }
  Vec4 operator*(const Vec4& h) const { return matrix_ * h; }
  Pose operator*(const Pose& rhs) const;

  /// Projects the rotation block back onto SO(3) via SVD.
  void renormalize();

  /// Max deviation of C^T C from identity.
  double orthonormality_error() const;

  bool is_approx(const Pose& other, double tol = 1e-9) const {
    return (matrix_ - other.matrix_).cwiseAbs().maxCoeff() < tol;
  }

  // Compositions since the last renormalization; products renormalize
  // automatically once the chain exceeds kRenormalizeChain.
  static constexpr int kRenormalizeChain = 100;
  int chain_length() const { return chain_; }

 private:
  struct Unchecked {};
  Pose(const Mat4& matrix, Unchecked) : matrix_(matrix) {}

  Mat4 matrix_;
  int chain_ = 0;
};

Mat3 skew(const Vec3& v);
Vec3 unskew(const Mat3& m);

/// se(3) lift: 4x4 matrix with skew(phi) block and rho column.
Mat4 wedge(const Twist& xi);
Twist vee(const Mat4& m);

/// Adjoint-algebra lift: [skew(phi) skew(rho); 0 skew(phi)].
Mat6 curlywedge(const Twist& xi);

Mat3 so3_exp(const Vec3& phi);
/// Principal branch; throws GeometryError for rotations at angle pi.
Vec3 so3_log(const Mat3& rotation);
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_inv_left_jacobian(const Vec3& phi);

Pose exp_map(const Twist& xi);
Twist log_map(const Pose& pose);

Mat6 adjoint(const Pose& pose);

/// SE(3) left Jacobian, evaluated as a truncated curlywedge power series.
Mat6 left_jacobian(const Twist& xi);

enum class InvJacobianMode {
  kFirstOrder,  // I - curlywedge(xi)/2
  kSeries,      // inverse of the series left Jacobian
};

Mat6 inv_left_jacobian(const Twist& xi,
                       InvJacobianMode mode = InvJacobianMode::kFirstOrder);

/// 4x6 operator satisfying wedge(xi) * h == odot(h) * xi.
Mat46 odot(const Vec4& h);

}  // namespace mvo
