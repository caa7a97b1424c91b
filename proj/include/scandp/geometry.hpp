#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace scandp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid camera pose. `rotation` maps camera-frame vectors into the world
/// frame; the camera looks along its local +z axis, +x right, +y down.
struct Pose {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  Vec3 optical_axis() const { return rotation * Vec3::UnitZ(); }
  Vec3 transform(const Vec3& camera_point) const { return rotation * camera_point + translation; }

  bool valid() const {
    return translation.allFinite() && std::abs(rotation.norm() - 1.0) <= 1e-9;
  }
};

using PoseHorizon = std::vector<Pose>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Camera at `eye` looking at `target`; `up` fixes the roll (image up = `up`).
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// First two columns of the rotation matrix, stacked.
Eigen::Matrix<double, 6, 1> rotation_to_6d(const Quat& q);

/// Gram-Schmidt re-orthonormalisation of a (possibly noisy) 6D rotation.
Quat rotation_from_6d(const Eigen::Ref<const Eigen::Matrix<double, 6, 1>>& r6);

/// Pose as 3 translation + 6 rotation numbers.
Eigen::Matrix<double, 9, 1> pose_to_vector(const Pose& pose);
Pose pose_from_vector(const Eigen::Ref<const Eigen::Matrix<double, 9, 1>>& v);

/// Euclidean distance from `p` to the closed segment [a, b].
template <typename DerivedP, typename DerivedA, typename DerivedB>
typename DerivedP::Scalar point_segment_distance(const Eigen::MatrixBase<DerivedP>& p,
                                                 const Eigen::MatrixBase<DerivedA>& a,
                                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedP::Scalar;
  const auto ab = (b - a).eval();
  const Scalar len2 = ab.squaredNorm();
  if (len2 <= Scalar(0)) return (p - a).norm();
  Scalar s = (p - a).dot(ab) / len2;
  s = std::clamp(s, Scalar(0), Scalar(1));
  return (p - (a + s * ab)).norm();
}

/// Sum of consecutive translation distances.
double path_length(const PoseHorizon& poses);
double path_length(const std::vector<Vec3>& points);

/// Translation-linear, rotation-slerp blend of two poses.
Pose blend(const Pose& a, const Pose& b, double s);

}  // namespace scandp
