#include "core/measurement.hpp"

#include "core/errors.hpp"

#include <cmath>
#include <random>

namespace tdoa {

namespace {

constexpr double kDegenerateDistance = 1e-9;

struct LegGeometry {
  Vec3 tag;
  Vec3 u_i;  // unit vector anchor i -> tag
  Vec3 u_j;
  double r_i = 0.0;
  double r_j = 0.0;
};

LegGeometry legs(const AnchorPair& pair, const Vec3& tag, const AnchorPlacement& placement) {
  const int m = static_cast<int>(placement.size());
  if (pair.i < 1 || pair.i > m || pair.j < 1 || pair.j > m) {
    throw invalid_argument("anchor pair (" + std::to_string(pair.i) + "," + std::to_string(pair.j) +
                           ") outside placement of " + std::to_string(m) + " anchors");
  }
  LegGeometry g;
  g.tag = tag;
  const Vec3 di = tag - placement.anchor(pair.i);
  const Vec3 dj = tag - placement.anchor(pair.j);
  g.r_i = di.norm();
  g.r_j = dj.norm();
  if (g.r_i < kDegenerateDistance || g.r_j < kDegenerateDistance) {
    throw degenerate_geometry("tag coincides with an anchor of pair (" + std::to_string(pair.i) + "," +
                              std::to_string(pair.j) + ")");
  }
  g.u_i = di / g.r_i;
  g.u_j = dj / g.r_j;
  return g;
}

}  // namespace

bool AnchorPlacement::is_scheduled(const AnchorPair& pair) const {
  for (const auto& p : pairs) {
    if ((p.i == pair.i && p.j == pair.j) || (p.i == pair.j && p.j == pair.i)) return true;
  }
  return false;
}

void AnchorPlacement::validate() const {
  const int m = static_cast<int>(anchors.size());
  if (m < 2) throw invalid_argument("placement needs at least two anchors");
  for (int k = 0; k < m; ++k) {
    if (!is_finite(anchors[static_cast<std::size_t>(k)])) {
      throw invalid_argument("anchor " + std::to_string(k + 1) + " is not finite");
    }
  }
  if (pairs.empty()) throw invalid_argument("placement has an empty pair list");
  for (const auto& p : pairs) {
    if (p.i < 1 || p.i > m || p.j < 1 || p.j > m) {
      throw invalid_argument("pair (" + std::to_string(p.i) + "," + std::to_string(p.j) + ") out of range");
    }
    if (p.i == p.j) throw invalid_argument("pair (" + std::to_string(p.i) + "," + std::to_string(p.j) + ") repeats an anchor");
  }
}

std::vector<AnchorPair> ring_pairs(int anchor_count) {
  if (anchor_count < 2) throw invalid_argument("ring pairing needs at least two anchors");
  std::vector<AnchorPair> out;
  out.push_back({anchor_count, 1});
  for (int k = 1; k < anchor_count; ++k) out.push_back({k, k + 1});
  if (anchor_count == 2) out.pop_back();  // (2,1) and (1,2) are the same link
  return out;
}

std::vector<AnchorPair> disjoint_pairs(int anchor_count) {
  if (anchor_count < 2 || anchor_count % 2 != 0) {
    throw invalid_argument("disjoint pairing needs an even anchor count >= 2");
  }
  std::vector<AnchorPair> out;
  for (int k = 1; k < anchor_count; k += 2) out.push_back({k, k + 1});
  return out;
}

void ImuParams::validate(bool allow_zero) const {
  for (double s : {sigma_a, sigma_w, sigma_ba, sigma_bw}) {
    if (!std::isfinite(s) || s < 0.0 || (!allow_zero && s == 0.0)) {
      throw invalid_argument("IMU noise densities must be positive");
    }
  }
  if (!is_finite(gravity)) throw invalid_argument("gravity must be finite");
}

void TdoaParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw invalid_argument("tdoa sigma must be positive");
  if (!(variance_oos >= sigma * sigma)) throw invalid_argument("variance_oos must be at least sigma^2");
  if (!(nlos_bias_per_meter >= 0.0)) throw invalid_argument("nlos_bias_per_meter must be non-negative");
  if (!(nlos_extra_sigma >= 0.0)) throw invalid_argument("nlos_extra_sigma must be non-negative");
}

Vec3 tag_position(const Pose& pose, const Vec3& lever_arm) {
  return pose.position + pose.orientation.rotate(lever_arm);
}

double tdoa_predict(const AnchorPair& pair, const Pose& pose, const Vec3& lever_arm,
                    const AnchorPlacement& placement) {
  const auto g = legs(pair, tag_position(pose, lever_arm), placement);
  return g.r_j - g.r_i;
}

TdoaJacobian tdoa_jacobian(const AnchorPair& pair, const Pose& pose, const Vec3& lever_arm,
                           const AnchorPlacement& placement) {
  const auto g = legs(pair, tag_position(pose, lever_arm), placement);
  TdoaJacobian jac;
  jac.d_dp = (g.u_j - g.u_i).transpose();
  jac.d_dtheta = jac.d_dp * (-pose.orientation.matrix() * skew(lever_arm));
  return jac;
}

double nlos_bias(const AnchorPair& pair, const Vec3& point, const AnchorPlacement& placement,
                 const Environment& env, const TdoaParams& params) {
  const double kappa = params.nlos_bias_per_meter;
  return kappa * penetration_length(point, placement.anchor(pair.j), env) -
         kappa * penetration_length(point, placement.anchor(pair.i), env);
}

bool link_occluded(const AnchorPair& pair, const Vec3& point, const AnchorPlacement& placement,
                   const Environment& env) {
  return segment_occluded(point, placement.anchor(pair.i), env) ||
         segment_occluded(point, placement.anchor(pair.j), env);
}

MeasurementLog synth_imu(const Trajectory& trajectory, const ImuParams& params, double rate,
                         std::uint64_t seed) {
  if (!(rate > 0.0)) throw invalid_argument("IMU rate must be positive");
  params.validate(true);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] { return Vec3(normal(rng), normal(rng), normal(rng)); };

  const double dt = 1.0 / rate;
  const double sample_a = params.sigma_a * std::sqrt(rate);
  const double sample_w = params.sigma_w * std::sqrt(rate);
  const double step_ba = params.sigma_ba * std::sqrt(dt);
  const double step_bw = params.sigma_bw * std::sqrt(dt);

  Vec3 bias_a = Vec3::Zero();
  Vec3 bias_w = Vec3::Zero();
  MeasurementLog out;
  const auto count = static_cast<long>(std::floor(trajectory.duration() * rate + 1e-9));
  out.reserve(static_cast<std::size_t>(count) + 1);
  for (long k = 0; k <= count; ++k) {
    const double t = static_cast<double>(k) / rate;
    const auto truth = trajectory.at(t);
    const Vec3 specific_force = truth.pose.orientation.inverse().rotate(truth.acceleration - params.gravity);
    ImuSample s;
    s.acc = specific_force + bias_a + sample_a * draw();
    s.gyro = truth.angular_rate + bias_w + sample_w * draw();
    out.push_back({t, s});
    bias_a += step_ba * draw();
    bias_w += step_bw * draw();
  }
  return out;
}

MeasurementLog synth_tdoa(const Trajectory& trajectory, const AnchorPlacement& placement,
                          const Environment& env, const TdoaParams& params,
                          const TdoaSynthConfig& config, std::uint64_t seed) {
  if (placement.pairs.empty()) throw invalid_argument("placement has an empty pair list");
  if (!(config.rate > 0.0)) throw invalid_argument("TDOA rate must be positive");
  placement.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const int m = static_cast<int>(placement.size());
  auto measure = [&](const AnchorPair& pair, const Vec3& tag, double predicted, double t,
                     MeasurementLog& out) {
    const bool occluded = link_occluded(pair, tag, placement, env);
    const double bias = nlos_bias(pair, tag, placement, env, params);
    const double noise = std::sqrt(params.link_variance(occluded)) * normal(rng);
    out.push_back({t, TdoaSample{pair, predicted + bias + noise}});
  };

  MeasurementLog out;
  const auto count = static_cast<long>(std::floor(trajectory.duration() * config.rate + 1e-9));
  for (long k = 0; k <= count; ++k) {
    const double t = static_cast<double>(k) / config.rate;
    const auto truth = trajectory.at(t);
    const Vec3 tag = tag_position(truth.pose, config.lever_arm);
    const AnchorPair& pair = placement.pairs[static_cast<std::size_t>(k) % placement.pairs.size()];
    try {
      measure(pair, tag, tdoa_predict(pair, truth.pose, config.lever_arm, placement), t, out);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateGeometry) throw;
    }

    if (placement.mode != TdoaMode::Decentralized || uniform(rng) >= config.oos_fraction) continue;
    std::vector<AnchorPair> candidates;
    for (int i = 1; i <= m; ++i) {
      if ((placement.anchor(i) - tag).norm() > config.radio_range) continue;
      for (int j = i + 1; j <= m; ++j) {
        if ((placement.anchor(j) - tag).norm() > config.radio_range) continue;
        if (!placement.is_scheduled({i, j})) candidates.push_back({i, j});
      }
    }
    if (candidates.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const AnchorPair oos = candidates[pick(rng)];
    try {
      measure(oos, tag, tdoa_predict(oos, truth.pose, config.lever_arm, placement), t, out);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateGeometry) throw;
    }
  }
  return out;
}

}  // namespace tdoa
