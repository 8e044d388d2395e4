#include "core/trajectory.hpp"

#include "core/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace tdoa {

namespace {

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// Quintic smoothstep and its antiderivative / derivative.
double smoothstep(double x) { return x * x * x * (10.0 + x * (-15.0 + 6.0 * x)); }
double smoothstep_integral(double x) {
  const double x4 = x * x * x * x;
  return x4 * (2.5 + x * (-3.0 + x));
}
double smoothstep_derivative(double x) {
  const double x2 = x * x;
  return 30.0 * x2 * (1.0 - 2.0 * x + x2);
}

}  // namespace

CubicSplineCurve::CubicSplineCurve(std::vector<Vec3> waypoints) : points_(std::move(waypoints)) {
  if (points_.size() < 2) {
    throw invalid_argument("spline needs at least two waypoints");
  }
  const std::size_t n = points_.size() - 1;
  knots_.assign(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double h = (points_[k + 1] - points_[k]).norm();
    if (!(h > 1e-9)) {
      throw invalid_argument("consecutive waypoints must be distinct");
    }
    knots_[k + 1] = knots_[k] + h;
  }

  // Natural end conditions; Thomas algorithm on the interior moments.
  moments_.assign(n + 1, Vec3::Zero());
  if (n < 2) return;
  const std::size_t m = n - 1;
  std::vector<double> diag(m), upper(m), lower(m);
  std::vector<Vec3> rhs(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t k = r + 1;
    const double h0 = knots_[k] - knots_[k - 1];
    const double h1 = knots_[k + 1] - knots_[k];
    lower[r] = h0;
    diag[r] = 2.0 * (h0 + h1);
    upper[r] = h1;
    rhs[r] = 6.0 * ((points_[k + 1] - points_[k]) / h1 - (points_[k] - points_[k - 1]) / h0);
  }
  for (std::size_t r = 1; r < m; ++r) {
    const double w = lower[r] / diag[r - 1];
    diag[r] -= w * upper[r - 1];
    rhs[r] -= w * rhs[r - 1];
  }
  moments_[m] = rhs[m - 1] / diag[m - 1];
  for (std::size_t r = m - 1; r-- > 0;) {
    moments_[r + 1] = (rhs[r] - upper[r] * moments_[r + 2]) / diag[r];
  }
}

std::size_t CubicSplineCurve::segment(double u) const {
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), u);
  const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - knots_.begin() - 1, 0));
  return std::min(idx, knots_.size() - 2);
}

Vec3 CubicSplineCurve::position(double u) const {
  const std::size_t k = segment(u);
  const double h = knots_[k + 1] - knots_[k];
  const double a = (knots_[k + 1] - u) / h;
  const double b = (u - knots_[k]) / h;
  return a * points_[k] + b * points_[k + 1] +
         ((a * a * a - a) * moments_[k] + (b * b * b - b) * moments_[k + 1]) * (h * h / 6.0);
}

Vec3 CubicSplineCurve::first(double u) const {
  const std::size_t k = segment(u);
  const double h = knots_[k + 1] - knots_[k];
  const double a = (knots_[k + 1] - u) / h;
  const double b = (u - knots_[k]) / h;
  return (points_[k + 1] - points_[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * moments_[k] +
         (3.0 * b * b - 1.0) / 6.0 * h * moments_[k + 1];
}

Vec3 CubicSplineCurve::second(double u) const {
  const std::size_t k = segment(u);
  const double h = knots_[k + 1] - knots_[k];
  const double a = (knots_[k + 1] - u) / h;
  const double b = (u - knots_[k]) / h;
  return a * moments_[k] + b * moments_[k + 1];
}

LissajousCurve::LissajousCurve(Vec3 center, Vec3 amplitude, Vec3 frequency, Vec3 phase, double laps)
    : center_(std::move(center)),
      amplitude_(std::move(amplitude)),
      frequency_(std::move(frequency)),
      phase_(std::move(phase)),
      domain_end_(2.0 * std::numbers::pi * laps) {
  if (!(laps > 0.0)) throw invalid_argument("lissajous laps must be positive");
}

Vec3 LissajousCurve::position(double u) const {
  return center_ + amplitude_.cwiseProduct((frequency_ * u + phase_).array().sin().matrix());
}

Vec3 LissajousCurve::first(double u) const {
  return amplitude_.cwiseProduct(frequency_).cwiseProduct((frequency_ * u + phase_).array().cos().matrix());
}

Vec3 LissajousCurve::second(double u) const {
  return -amplitude_.cwiseProduct(frequency_.cwiseAbs2())
              .cwiseProduct((frequency_ * u + phase_).array().sin().matrix());
}

Trajectory::Trajectory(std::shared_ptr<const Curve> curve, TimingProfile timing, double static_duration)
    : curve_(std::move(curve)), timing_(timing) {
  if (!(timing_.speed > 0.0)) throw invalid_argument("speed must be positive");
  if (timing_.hold < 0.0 || timing_.ramp < 0.0) throw invalid_argument("hold and ramp must be non-negative");

  const int pieces = curve_->pieces();
  const double end = curve_->domain_end();
  table_u_.resize(static_cast<std::size_t>(pieces) + 1);
  table_s_.resize(static_cast<std::size_t>(pieces) + 1);
  table_u_[0] = 0.0;
  table_s_[0] = 0.0;
  for (int k = 1; k <= pieces; ++k) {
    table_u_[k] = end * k / pieces;
    table_s_[k] = table_s_[k - 1] + arc_length(table_u_[k - 1], table_u_[k]);
  }
  length_ = table_s_.back();

  if (length_ < 1e-9) {
    length_ = 0.0;
    duration_ = timing_.hold + static_duration;
  } else {
    const double ramp_distance = 0.5 * timing_.speed * timing_.ramp;
    if (ramp_distance > length_) throw invalid_argument("path is shorter than the acceleration ramp");
    duration_ = timing_.hold + timing_.ramp + (length_ - ramp_distance) / timing_.speed;
  }

  const Vec3 tangent = curve_->first(0.0);
  if (tangent.head<2>().norm() > 1e-9) fallback_yaw_ = std::atan2(tangent.y(), tangent.x());
}

double Trajectory::arc_length(double u0, double u1) const {
  const double half = 0.5 * (u1 - u0);
  const double mid = 0.5 * (u1 + u0);
  double sum = 0.0;
  for (std::size_t k = 0; k < kGaussNodes.size(); ++k) {
    sum += kGaussWeights[k] * curve_->first(mid + half * kGaussNodes[k]).norm();
  }
  return sum * half;
}

double Trajectory::parameter_at(double s) const {
  if (s <= 0.0) return 0.0;
  if (s >= length_) return table_u_.back();
  const auto it = std::upper_bound(table_s_.begin(), table_s_.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - table_s_.begin()) - 1;
  const double lo = table_u_[k];
  const double hi = table_u_[k + 1];
  const double target = s - table_s_[k];
  double u = lo + (hi - lo) * target / (table_s_[k + 1] - table_s_[k]);
  for (int iter = 0; iter < 20; ++iter) {
    const double f = arc_length(lo, u) - target;
    if (std::abs(f) < 1e-13) break;
    const double speed = curve_->first(u).norm();
    if (!(speed > 0.0)) break;
    u = std::clamp(u - f / speed, lo, hi);
  }
  return u;
}

void Trajectory::distance(double t, double& s, double& s_dot, double& s_ddot) const {
  const double v = timing_.speed;
  const double tau = t - timing_.hold;
  if (length_ == 0.0 || tau <= 0.0) {
    s = s_dot = s_ddot = 0.0;
  } else if (tau < timing_.ramp) {
    const double x = tau / timing_.ramp;
    s = v * timing_.ramp * smoothstep_integral(x);
    s_dot = v * smoothstep(x);
    s_ddot = v / timing_.ramp * smoothstep_derivative(x);
  } else {
    s = 0.5 * v * timing_.ramp + v * (tau - timing_.ramp);
    s_dot = v;
    s_ddot = 0.0;
  }
  s = std::min(s, length_);
}

KinematicState Trajectory::at(double t) const {
  KinematicState out;
  out.t = t;
  t = std::clamp(t, 0.0, duration_);
  double s = 0.0, s_dot = 0.0, s_ddot = 0.0;
  distance(t, s, s_dot, s_ddot);

  const double u = parameter_at(s);
  out.pose.position = curve_->position(u);
  if (length_ == 0.0) {
    out.pose.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), fallback_yaw_);
    return out;
  }

  const Vec3 d1 = curve_->first(u);
  const Vec3 d2 = curve_->second(u);
  const double g = d1.norm();
  const Vec3 tangent = d1 / g;
  const Vec3 curvature = (d2 - d2.dot(tangent) * tangent) / (g * g);  // d²p/ds²

  out.velocity = tangent * s_dot;
  out.acceleration = curvature * s_dot * s_dot + tangent * s_ddot;

  const double horizontal = tangent.x() * tangent.x() + tangent.y() * tangent.y();
  double yaw = fallback_yaw_;
  double yaw_rate = 0.0;
  if (horizontal > 1e-12) {
    yaw = std::atan2(tangent.y(), tangent.x());
    yaw_rate = (tangent.x() * curvature.y() - tangent.y() * curvature.x()) / horizontal * s_dot;
  }
  out.pose.orientation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), yaw);
  out.angular_rate = Vec3(0.0, 0.0, yaw_rate);
  return out;
}

}  // namespace tdoa
