#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace gaudp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// p_out = rot * p_in + trans
struct RigidTransform {
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rot * p + trans; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rot = rot.transpose();
    inv.trans = -(rot.transpose() * trans);
    return inv;
  }

  // this ∘ other: applies other first.
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rot = rot * other.rot;
    out.trans = rot * other.trans + trans;
    return out;
  }

  bool is_identity(double tol = 0.0) const {
    return (rot - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           trans.cwiseAbs().maxCoeff() <= tol;
  }
};

// Rotation matrix from a unit quaternion (w,x,y,z).
inline Mat3 quat_to_matrix(double w, double x, double y, double z) {
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

// (w,x,y,z) with w >= 0.
inline Vec4 matrix_to_quat(const Mat3& m) {
  Quat q(m);
  q.normalize();
  Vec4 v(q.w(), q.x(), q.y(), q.z());
  if (v[0] < 0) v = -v;
  return v;
}

// Hamilton product a*b, both (w,x,y,z).
inline Vec4 quat_mul(const Vec4& a, const Vec4& b) {
  return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

inline Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace gaudp
