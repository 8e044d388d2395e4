#include "core/geometry.hpp"

#include "core/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tdoa {

bool is_finite(const Vec3& v) { return v.allFinite(); }

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) : q_(w, x, y, z) {
  const double n = q_.norm();
  if (!std::isfinite(n) || n < 1e-12) {
    throw invalid_argument("quaternion must be finite and non-zero");
  }
  q_.coeffs() /= n;
}

UnitQuaternion::UnitQuaternion(const Eigen::Quaterniond& q) : UnitQuaternion(q.w(), q.x(), q.y(), q.z()) {}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(angle)) {
    throw invalid_argument("axis-angle needs a non-zero finite axis");
  }
  const Vec3 v = std::sin(0.5 * angle) / n * axis;
  return {std::cos(0.5 * angle), v.x(), v.y(), v.z()};
}

UnitQuaternion UnitQuaternion::from_rotation_matrix(const Mat3& r) {
  return UnitQuaternion(Eigen::Quaterniond(r));
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& rhs) const {
  return UnitQuaternion(q_ * rhs.q_);
}

UnitQuaternion UnitQuaternion::inverse() const { return UnitQuaternion(q_.conjugate()); }

Vec3 UnitQuaternion::rotate(const Vec3& v) const { return q_ * v; }

UnitQuaternion quat_from_small_angle(const Vec3& delta_theta) {
  if (!delta_theta.allFinite()) {
    throw invalid_argument("rotation vector must be finite");
  }
  const double angle = delta_theta.norm();
  if (angle <= kSmallAngleThreshold) {
    const Vec3 half = 0.5 * delta_theta;
    return {1.0, half.x(), half.y(), half.z()};
  }
  const Vec3 v = std::sin(0.5 * angle) / angle * delta_theta;
  return {std::cos(0.5 * angle), v.x(), v.y(), v.z()};
}

Vec3 rotate(const UnitQuaternion& q, const Vec3& v) { return q.rotate(v); }

bool Box::contains(const Vec3& p, double tol) const {
  return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
}

bool Box::contains_strict(const Vec3& p) const {
  return (p.array() > min.array()).all() && (p.array() < max.array()).all();
}

bool Box::contains(const Box& other) const {
  return (other.min.array() >= min.array()).all() && (other.max.array() <= max.array()).all();
}

void Environment::validate() const {
  if (!is_finite(boundary.min) || !is_finite(boundary.max) ||
      !(boundary.min.array() < boundary.max.array()).all()) {
    throw invalid_argument("environment boundary must satisfy min < max component-wise");
  }
  for (std::size_t k = 0; k < obstacles.size(); ++k) {
    const auto& o = obstacles[k];
    if (!is_finite(o.min) || !is_finite(o.max) || !(o.min.array() < o.max.array()).all()) {
      throw invalid_argument("obstacle " + std::to_string(k) + " must satisfy min < max component-wise");
    }
    if (!boundary.contains(o)) {
      throw invalid_argument("obstacle " + std::to_string(k) + " is not inside the boundary");
    }
  }
}

SegmentInterval clip_segment(const Vec3& a, const Vec3& b, const Box& box) {
  const Vec3 d = b - a;
  SegmentInterval out{0.0, 1.0};
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (!(a[k] > box.min[k] && a[k] < box.max[k])) {
        return {0.0, 0.0};
      }
      continue;
    }
    double enter = (box.min[k] - a[k]) / d[k];
    double exit = (box.max[k] - a[k]) / d[k];
    if (enter > exit) std::swap(enter, exit);
    out.t0 = std::max(out.t0, enter);
    out.t1 = std::min(out.t1, exit);
    if (out.empty()) return {0.0, 0.0};
  }
  return out;
}

bool segment_occluded(const Vec3& a, const Vec3& b, const Environment& env) {
  return std::any_of(env.obstacles.begin(), env.obstacles.end(),
                     [&](const Obstacle& o) { return !clip_segment(a, b, o).empty(); });
}

double penetration_length(const Vec3& a, const Vec3& b, const Environment& env) {
  std::vector<SegmentInterval> hits;
  for (const auto& o : env.obstacles) {
    const auto iv = clip_segment(a, b, o);
    if (!iv.empty()) hits.push_back(iv);
  }
  if (hits.empty()) return 0.0;
  std::sort(hits.begin(), hits.end(), [](const auto& l, const auto& r) { return l.t0 < r.t0; });

  // Overlapping obstacles count once.
  double covered = 0.0;
  double start = hits.front().t0;
  double end = hits.front().t1;
  for (std::size_t k = 1; k < hits.size(); ++k) {
    if (hits[k].t0 <= end) {
      end = std::max(end, hits[k].t1);
    } else {
      covered += end - start;
      start = hits[k].t0;
      end = hits[k].t1;
    }
  }
  covered += end - start;
  return covered * (b - a).norm();
}

}  // namespace tdoa
