#include "scandp/geometry.hpp"

#include <cmath>

namespace scandp {

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 dir = target - eye;
  if (!eye.allFinite() || !target.allFinite() || dir.norm() < 1e-12) {
    throw GeometryError("look_at: eye and target coincide");
  }
  const Vec3 forward = dir.normalized();
  const Vec3 right_raw = forward.cross(up);
  if (right_raw.norm() < 1e-9 * std::max(1.0, up.norm())) {
    throw GeometryError("look_at: up is parallel to the viewing direction");
  }
  const Vec3 right = right_raw.normalized();
  const Vec3 down = forward.cross(right);

  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  Pose pose;
  pose.translation = eye;
  pose.rotation = Quat(r).normalized();
  return pose;
}

Eigen::Matrix<double, 6, 1> rotation_to_6d(const Quat& q) {
  const Mat3 r = q.normalized().toRotationMatrix();
  Eigen::Matrix<double, 6, 1> out;
  out << r.col(0), r.col(1);
  return out;
}

Quat rotation_from_6d(const Eigen::Ref<const Eigen::Matrix<double, 6, 1>>& r6) {
  Vec3 a = r6.head<3>();
  Vec3 b = r6.tail<3>();
  if (!a.allFinite() || !b.allFinite() || a.norm() < 1e-12) {
    throw GeometryError("rotation_from_6d: degenerate first column");
  }
  const Vec3 c0 = a.normalized();
  Vec3 c1 = b - c0.dot(b) * c0;
  if (c1.norm() < 1e-12) {
    // Columns parallel: pick any orthogonal direction.
    c1 = c0.unitOrthogonal();
  }
  c1.normalize();
  Mat3 r;
  r.col(0) = c0;
  r.col(1) = c1;
  r.col(2) = c0.cross(c1);
  return Quat(r).normalized();
}

Eigen::Matrix<double, 9, 1> pose_to_vector(const Pose& pose) {
  Eigen::Matrix<double, 9, 1> v;
  v << pose.translation, rotation_to_6d(pose.rotation);
  return v;
}

Pose pose_from_vector(const Eigen::Ref<const Eigen::Matrix<double, 9, 1>>& v) {
  Pose pose;
  pose.translation = v.head<3>();
  pose.rotation = rotation_from_6d(v.tail<6>());
  return pose;
}

double path_length(const PoseHorizon& poses) {
  double total = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    total += (poses[i].translation - poses[i - 1].translation).norm();
  }
  return total;
}

double path_length(const std::vector<Vec3>& points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

Pose blend(const Pose& a, const Pose& b, double s) {
  Pose out;
  out.translation = (1.0 - s) * a.translation + s * b.translation;
  out.rotation = a.rotation.slerp(s, b.rotation).normalized();
  return out;
}

}  // namespace scandp
