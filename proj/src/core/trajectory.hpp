#pragma once

#include "core/geometry.hpp"

#include <memory>
#include <vector>

namespace tdoa {

/// True kinematics of the IMU body at one instant. Acceleration is expressed
/// in the inertial frame; angular rate in the body frame.
struct KinematicState {
  double t = 0.0;
  Pose pose;
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 angular_rate = Vec3::Zero();
};

/// Regular parametric curve u in [0, domain_end] with analytic derivatives.
class Curve {
 public:
  virtual ~Curve() = default;
  virtual double domain_end() const = 0;
  // Number of pieces the arc-length table splits the domain into.
  virtual int pieces() const = 0;
  virtual Vec3 position(double u) const = 0;
  virtual Vec3 first(double u) const = 0;
  virtual Vec3 second(double u) const = 0;
};

/// Natural cubic spline through waypoints, chord-length knots.
class CubicSplineCurve final : public Curve {
 public:
  explicit CubicSplineCurve(std::vector<Vec3> waypoints);

  double domain_end() const override { return knots_.back(); }
  int pieces() const override { return static_cast<int>(knots_.size() - 1) * 16; }
  Vec3 position(double u) const override;
  Vec3 first(double u) const override;
  Vec3 second(double u) const override;

 private:
  std::size_t segment(double u) const;

  std::vector<double> knots_;
  std::vector<Vec3> points_;
  std::vector<Vec3> moments_;  // second derivatives at the knots
};

/// center + amplitude ⊙ sin(frequency ⊙ u + phase), u in [0, 2π·laps].
class LissajousCurve final : public Curve {
 public:
  LissajousCurve(Vec3 center, Vec3 amplitude, Vec3 frequency, Vec3 phase, double laps);

  double domain_end() const override { return domain_end_; }
  int pieces() const override { return 512; }
  Vec3 position(double u) const override;
  Vec3 first(double u) const override;
  Vec3 second(double u) const override;

 private:
  Vec3 center_, amplitude_, frequency_, phase_;
  double domain_end_;
};

struct TimingProfile {
  double speed = 1.0;  // m/s cruise speed along the path
  double hold = 0.0;   // s stationary at the start
  double ramp = 0.0;   // s of smooth acceleration from rest to cruise speed
};

/// Arc-length parameterized motion along a curve with yaw following the
/// horizontal tangent and zero roll/pitch. Position is C² in time.
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const Curve> curve, TimingProfile timing, double static_duration = 10.0);

  double duration() const { return duration_; }
  double length() const { return length_; }
  KinematicState at(double t) const;

 private:
  // Distance travelled s(t) and its first two time derivatives.
  void distance(double t, double& s, double& s_dot, double& s_ddot) const;
  double parameter_at(double s) const;
  double arc_length(double u0, double u1) const;

  std::shared_ptr<const Curve> curve_;
  TimingProfile timing_;
  std::vector<double> table_u_;
  std::vector<double> table_s_;
  double length_ = 0.0;
  double duration_ = 0.0;
  double fallback_yaw_ = 0.0;
};

}  // namespace tdoa
