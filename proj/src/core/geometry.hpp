#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>
#include <vector>

namespace tdoa {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

bool is_finite(const Vec3& v);

Mat3 skew(const Vec3& v);

/// Hamilton unit quaternion, scalar first, rotating body vectors into the
/// inertial frame. Every constructor and product renormalizes, so the norm
/// stays within 1e-9 of one.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;
  UnitQuaternion(double w, double x, double y, double z);
  explicit UnitQuaternion(const Eigen::Quaterniond& q);

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);
  static UnitQuaternion from_rotation_matrix(const Mat3& r);

  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  const Eigen::Quaterniond& eigen() const { return q_; }

  UnitQuaternion operator*(const UnitQuaternion& rhs) const;
  UnitQuaternion inverse() const;
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Vec3 rotate(const Vec3& v) const;

 private:
  Eigen::Quaterniond q_{Eigen::Quaterniond::Identity()};
};

/// Rotation for a rotation vector. Uses the first-order form
/// normalize(1, dtheta/2) up to 1e-3 rad and the exact exponential map above.
UnitQuaternion quat_from_small_angle(const Vec3& delta_theta);

inline constexpr double kSmallAngleThreshold = 1e-3;

Vec3 rotate(const UnitQuaternion& q, const Vec3& v);

struct Pose {
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;
};

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  bool contains(const Vec3& p, double tol = 0.0) const;
  bool contains_strict(const Vec3& p) const;
  bool contains(const Box& other) const;
};

using Obstacle = Box;

struct Environment {
  std::string name;
  Box boundary;
  std::vector<Obstacle> obstacles;

  // Throws InvalidArgument when a box is inverted or an obstacle leaves the
  // boundary.
  void validate() const;
};

/// Parameter interval (t0, t1) of the open segment a + t(b - a), t in (0, 1),
/// inside the open box. Empty when t1 <= t0.
struct SegmentInterval {
  double t0 = 0.0;
  double t1 = 0.0;
  bool empty() const { return !(t1 > t0); }
};

SegmentInterval clip_segment(const Vec3& a, const Vec3& b, const Box& box);

bool segment_occluded(const Vec3& a, const Vec3& b, const Environment& env);

/// Length of the union of the segment portions inside obstacle interiors.
double penetration_length(const Vec3& a, const Vec3& b, const Environment& env);

}  // namespace tdoa
