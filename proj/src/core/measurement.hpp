#pragma once

#include "core/geometry.hpp"
#include "core/trajectory.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <variant>
#include <vector>

namespace tdoa {

/// Ordered anchor pair, 1-based indices. A measurement for (i, j) is
/// ‖p − a_j‖ − ‖p − a_i‖.
struct AnchorPair {
  int i = 0;
  int j = 0;
  friend bool operator==(const AnchorPair&, const AnchorPair&) = default;
};

enum class TdoaMode { Centralized, Decentralized };

struct AnchorPlacement {
  std::vector<Vec3> anchors;
  std::vector<AnchorPair> pairs;
  TdoaMode mode = TdoaMode::Centralized;

  std::size_t size() const { return anchors.size(); }
  const Vec3& anchor(int index) const { return anchors[static_cast<std::size_t>(index - 1)]; }
  // True when (i, j) or (j, i) belongs to the pair schedule.
  bool is_scheduled(const AnchorPair& pair) const;
  void validate() const;
};

/// {(m,1), (1,2), ..., (m-1,m)}.
std::vector<AnchorPair> ring_pairs(int anchor_count);
/// {(1,2), (3,4), ..., (m-1,m)}; m must be even.
std::vector<AnchorPair> disjoint_pairs(int anchor_count);

struct ImuParams {
  double sigma_a = 0.02;    // m/s²/√Hz
  double sigma_w = 0.002;   // rad/s/√Hz
  double sigma_ba = 2e-4;   // m/s³/√Hz
  double sigma_bw = 2e-5;   // rad/s²/√Hz
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  void validate(bool allow_zero = false) const;
};

struct TdoaParams {
  double sigma = 0.1;               // m
  double variance_oos = 0.025;      // m²
  double nlos_bias_per_meter = 0.4; // κ
  double nlos_extra_sigma = 0.1;    // m

  void validate() const;
  double link_variance(bool occluded) const {
    return sigma * sigma + (occluded ? nlos_extra_sigma * nlos_extra_sigma : 0.0);
  }
};

struct ImuSample {
  Vec3 acc = Vec3::Zero();
  Vec3 gyro = Vec3::Zero();
};

struct TdoaSample {
  AnchorPair pair;
  double d = 0.0;
};

struct GroundTruthSample {
  Pose pose;
  Vec3 velocity = Vec3::Zero();
};

struct MeasurementRecord {
  double t = 0.0;
  std::variant<ImuSample, TdoaSample, GroundTruthSample> payload;
};

using MeasurementLog = std::vector<MeasurementRecord>;

/// Position of the tag antenna for a body pose.
Vec3 tag_position(const Pose& pose, const Vec3& lever_arm);

double tdoa_predict(const AnchorPair& pair, const Pose& pose, const Vec3& lever_arm,
                    const AnchorPlacement& placement);

struct TdoaJacobian {
  Eigen::RowVector3d d_dp;
  Eigen::RowVector3d d_dtheta;  // local (right) rotation perturbation
};

TdoaJacobian tdoa_jacobian(const AnchorPair& pair, const Pose& pose, const Vec3& lever_arm,
                           const AnchorPlacement& placement);

double nlos_bias(const AnchorPair& pair, const Vec3& point, const AnchorPlacement& placement,
                 const Environment& env, const TdoaParams& params);

/// True when either leg of the pair is blocked at the given tag position.
bool link_occluded(const AnchorPair& pair, const Vec3& point, const AnchorPlacement& placement,
                   const Environment& env);

MeasurementLog synth_imu(const Trajectory& trajectory, const ImuParams& params, double rate,
                         std::uint64_t seed);

struct TdoaSynthConfig {
  double rate = 50.0;          // Hz, total across the pair cycle
  double oos_fraction = 0.3;   // decentralized extra pairs per scheduled pair
  double radio_range = 15.0;   // m
  Vec3 lever_arm = Vec3::Zero();
};

MeasurementLog synth_tdoa(const Trajectory& trajectory, const AnchorPlacement& placement,
                          const Environment& env, const TdoaParams& params,
                          const TdoaSynthConfig& config, std::uint64_t seed);

}  // namespace tdoa
