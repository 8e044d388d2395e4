#include "core/eskf.hpp"

#include "core/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace tdoa {

namespace {

constexpr double kMaxInjectedAngle = 0.5;  // rad
constexpr double kStaticTolerance = 0.2;   // relative deviation from |g|

}  // namespace

void EskfConfig::validate() const {
  if (!(gate_gamma > 0.0)) throw invalid_argument("gate_gamma must be positive");
  if (!(variance_scheduled > 0.0) || !(variance_oos > 0.0)) {
    throw invalid_argument("measurement variances must be positive");
  }
  if (!is_finite(lever_arm)) throw invalid_argument("lever arm must be finite");
  imu.validate(true);
}

Mat15 transition_matrix(const NavState& state, const ImuInput& imu, double dt) {
  const Mat3 R = state.q.matrix();
  const Vec3 acc = imu.acc - state.b_a;
  const Vec3 rate = imu.gyro - state.b_w;

  Mat15 F = Mat15::Identity();
  F.block<3, 3>(kPos, kVel) = Mat3::Identity() * dt;
  F.block<3, 3>(kVel, kAtt) = -R * skew(acc) * dt;
  F.block<3, 3>(kVel, kAccBias) = -R * dt;
  F.block<3, 3>(kAtt, kAtt) = quat_from_small_angle(rate * dt).matrix().transpose();
  F.block<3, 3>(kAtt, kGyroBias) = -Mat3::Identity() * dt;
  return F;
}

PredictResult predict(const NavState& state, const ErrorState& err, const ImuInput& imu, double dt,
                      const EskfConfig& cfg) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw invalid_argument("predict needs dt > 0");

  PredictResult out;
  out.gap_warning = dt > cfg.max_dt;

  const Vec3 acc_world = state.q.rotate(imu.acc - state.b_a) + cfg.imu.gravity;
  NavState& next = out.nominal;
  next = state;
  next.p = state.p + state.v * dt + 0.5 * acc_world * dt * dt;
  next.v = state.v + acc_world * dt;
  next.q = state.q * quat_from_small_angle((imu.gyro - state.b_w) * dt);
  next.t = state.t + dt;

  const Mat15 F = transition_matrix(state, imu, dt);
  out.error.dx = F * err.dx;
  out.error.P = F * err.P * F.transpose();
  const auto& n = cfg.imu;
  out.error.P.diagonal().segment<3>(kVel).array() += n.sigma_a * n.sigma_a * dt;
  out.error.P.diagonal().segment<3>(kAtt).array() += n.sigma_w * n.sigma_w * dt;
  out.error.P.diagonal().segment<3>(kAccBias).array() += n.sigma_ba * n.sigma_ba * dt;
  out.error.P.diagonal().segment<3>(kGyroBias).array() += n.sigma_bw * n.sigma_bw * dt;
  condition_covariance(out.error.P);
  return out;
}

Eigen::Matrix<double, 1, kErrorDim> tdoa_error_jacobian(const AnchorPair& pair, const NavState& state,
                                                        const Vec3& lever_arm,
                                                        const AnchorPlacement& placement) {
  const auto jac = tdoa_jacobian(pair, state.pose(), lever_arm, placement);
  Eigen::Matrix<double, 1, kErrorDim> H = Eigen::Matrix<double, 1, kErrorDim>::Zero();
  H.segment<3>(kPos) = jac.d_dp;
  H.segment<3>(kAtt) = jac.d_dtheta;
  return H;
}

CorrectResult correct_tdoa(const NavState& state, const ErrorState& err, const TdoaSample& record,
                           const AnchorPlacement& placement, const EskfConfig& cfg) {
  CorrectResult out{state, err, {}};
  double predicted = 0.0;
  Eigen::Matrix<double, 1, kErrorDim> H;
  try {
    predicted = tdoa_predict(record.pair, state.pose(), cfg.lever_arm, placement);
    H = tdoa_error_jacobian(record.pair, state, cfg.lever_arm, placement);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateGeometry) throw;
    out.decision.skipped = true;
    return out;
  }

  const double R = placement.is_scheduled(record.pair) ? cfg.variance_scheduled : cfg.variance_oos;
  const Eigen::Matrix<double, kErrorDim, 1> PHt = err.P * H.transpose();
  const double S = (H * PHt)(0, 0) + R;
  const double nu = record.d - predicted;

  GateDecision& d = out.decision;
  d.innovation = nu;
  d.innovation_var = S;
  d.normalized = std::abs(nu) / std::sqrt(S);
  const double statistic = cfg.gate_mode == GateMode::Scalar ? d.normalized : nu * nu / S;
  d.accepted = statistic <= cfg.gate_gamma;
  if (!d.accepted) return out;

  const Vec15 K = PHt / S;
  ErrorState updated;
  updated.dx = err.dx + K * (nu - (H * err.dx)(0, 0));
  const Mat15 IKH = Mat15::Identity() - K * H;
  updated.P = IKH * err.P * IKH.transpose() + K * R * K.transpose();
  condition_covariance(updated.P);

  auto injected = inject_and_reset(state, updated);
  out.nominal = injected.nominal;
  out.error = injected.error;
  return out;
}

FilterState inject_and_reset(const NavState& state, const ErrorState& err) {
  const Vec3 dtheta = err.dx.segment<3>(kAtt);
  if (!err.dx.allFinite() || !(dtheta.norm() < kMaxInjectedAngle)) {
    std::ostringstream msg;
    msg << "filter divergence at t=" << state.t << ": |dtheta|=" << dtheta.norm()
        << " rad, |dp|=" << err.dx.segment<3>(kPos).norm() << " m";
    throw Error(ErrorKind::Divergence, msg.str());
  }

  FilterState out{state, err};
  NavState& x = out.nominal;
  x.p += err.dx.segment<3>(kPos);
  x.v += err.dx.segment<3>(kVel);
  if (dtheta.squaredNorm() > 0.0) x.q = state.q * quat_from_small_angle(dtheta);
  x.b_a += err.dx.segment<3>(kAccBias);
  x.b_w += err.dx.segment<3>(kGyroBias);

  out.error.dx.setZero();
  if (dtheta.squaredNorm() > 0.0) {
    Mat15 G = Mat15::Identity();
    G.block<3, 3>(kAtt, kAtt) -= skew(0.5 * dtheta);
    out.error.P = G * err.P * G.transpose();
    condition_covariance(out.error.P);
  }
  return out;
}

void condition_covariance(Mat15& P) {
  P = 0.5 * (P + P.transpose()).eval();
  Eigen::LDLT<Mat15> ldlt(P);
  if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() >= 0.0).all()) return;
  Eigen::SelfAdjointEigenSolver<Mat15> eig(P);
  const Vec15 clamped = eig.eigenvalues().cwiseMax(0.0);
  P = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  P = 0.5 * (P + P.transpose()).eval();
}

FilterState initialize(const std::optional<Vec3>& first_fix, const std::optional<Mat3>& fix_covariance,
                       const Vec3& accel_mean, const EskfConfig& cfg) {
  const double g = cfg.imu.gravity.norm();
  if (!is_finite(accel_mean) || std::abs(accel_mean.norm() - g) > kStaticTolerance * g) {
    std::ostringstream msg;
    msg << "not static: mean specific force " << accel_mean.norm() << " m/s^2 vs gravity " << g;
    throw invalid_argument(msg.str());
  }

  const double roll = std::atan2(accel_mean.y(), accel_mean.z());
  const double pitch = std::atan2(-accel_mean.x(), std::hypot(accel_mean.y(), accel_mean.z()));

  FilterState out;
  NavState& x = out.nominal;
  x.q = UnitQuaternion::from_axis_angle(Vec3::UnitY(), pitch) *
        UnitQuaternion::from_axis_angle(Vec3::UnitX(), roll);
  if (first_fix) x.p = *first_fix;

  const auto& c = cfg.initial;
  Mat15& P = out.error.P;
  P.setZero();
  if (first_fix && fix_covariance) {
    P.block<3, 3>(kPos, kPos) = *fix_covariance;
  } else if (first_fix) {
    P.block<3, 3>(kPos, kPos) = Mat3::Identity() * c.fix_position;
  } else {
    P.block<3, 3>(kPos, kPos) = Mat3::Identity() * c.position;
  }
  P.block<3, 3>(kVel, kVel) = Mat3::Identity() * c.velocity;
  // Attitude prior is stated in the inertial frame (tilt, yaw) and mapped to
  // the local error.
  const Mat3 R = x.q.matrix();
  const Vec3 world_att(c.roll_pitch, c.roll_pitch, c.yaw);
  P.block<3, 3>(kAtt, kAtt) = R.transpose() * world_att.asDiagonal() * R;
  P.block<3, 3>(kAccBias, kAccBias) = Mat3::Identity() * c.accel_bias;
  P.block<3, 3>(kGyroBias, kGyroBias) = Mat3::Identity() * c.gyro_bias;
  condition_covariance(P);
  return out;
}

}  // namespace tdoa
