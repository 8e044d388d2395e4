#pragma once

#include "core/geometry.hpp"
#include "core/measurement.hpp"

#include <Eigen/Core>

#include <optional>

namespace tdoa {

inline constexpr int kErrorDim = 15;
using Vec15 = Eigen::Matrix<double, kErrorDim, 1>;
using Mat15 = Eigen::Matrix<double, kErrorDim, kErrorDim>;

// Offsets of the error-state blocks.
inline constexpr int kPos = 0;
inline constexpr int kVel = 3;
inline constexpr int kAtt = 6;
inline constexpr int kAccBias = 9;
inline constexpr int kGyroBias = 12;

struct NavState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  UnitQuaternion q;
  Vec3 b_a = Vec3::Zero();
  Vec3 b_w = Vec3::Zero();
  double t = 0.0;

  Pose pose() const { return {p, q}; }
};

/// Error state ordered (δp, δv, δθ, δb_a, δb_ω) with its covariance.
struct ErrorState {
  Vec15 dx = Vec15::Zero();
  Mat15 P = Mat15::Identity();
};

enum class GateMode {
  Scalar,     // reject when |ν|/√S > γ
  ChiSquare,  // reject when ν²/S > γ
};

struct InitialCovariance {
  double position = 25.0;      // m², used when no fix is available
  double fix_position = 0.25;  // m², fix without its own covariance
  double velocity = 0.25;      // m²/s²
  double roll_pitch = 0.0025;  // rad²
  double yaw = 1.0;            // rad²
  double accel_bias = 0.01;    // (m/s²)²
  double gyro_bias = 1e-4;     // (rad/s)²
};

struct EskfConfig {
  Vec3 lever_arm = Vec3::Zero();
  double sigma_tdoa = 0.1;
  double variance_scheduled = 0.01;
  double variance_oos = 0.025;
  double gate_gamma = 5.0;
  GateMode gate_mode = GateMode::Scalar;
  ImuParams imu;
  InitialCovariance initial;
  double max_dt = 0.1;

  void validate() const;
};

struct GateDecision {
  double innovation = 0.0;
  double innovation_var = 0.0;
  double normalized = 0.0;
  bool accepted = false;
  bool skipped = false;  // degenerate geometry, not gated
};

struct ImuInput {
  Vec3 acc = Vec3::Zero();
  Vec3 gyro = Vec3::Zero();
};

struct FilterState {
  NavState nominal;
  ErrorState error;
};

struct PredictResult {
  NavState nominal;
  ErrorState error;
  bool gap_warning = false;
};

PredictResult predict(const NavState& state, const ErrorState& err, const ImuInput& imu, double dt,
                      const EskfConfig& cfg);

/// Error-state transition matrix for one step, exposed for tests.
Mat15 transition_matrix(const NavState& state, const ImuInput& imu, double dt);

struct CorrectResult {
  NavState nominal;
  ErrorState error;
  GateDecision decision;
};

/// 1×15 measurement Jacobian of the TDOA model with respect to the error state.
Eigen::Matrix<double, 1, kErrorDim> tdoa_error_jacobian(const AnchorPair& pair, const NavState& state,
                                                        const Vec3& lever_arm,
                                                        const AnchorPlacement& placement);

CorrectResult correct_tdoa(const NavState& state, const ErrorState& err, const TdoaSample& record,
                           const AnchorPlacement& placement, const EskfConfig& cfg);

FilterState inject_and_reset(const NavState& state, const ErrorState& err);

/// Symmetrizes P and clamps eigenvalues below zero.
void condition_covariance(Mat15& P);

FilterState initialize(const std::optional<Vec3>& first_fix, const std::optional<Mat3>& fix_covariance,
                       const Vec3& accel_mean, const EskfConfig& cfg);

}  // namespace tdoa
