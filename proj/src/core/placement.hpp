#pragma once

#include "core/geometry.hpp"
#include "core/measurement.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace tdoa {

inline constexpr double kConditionCutoff = 1e12;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct TargetSet {
  std::vector<Vec3> points;
};

/// Per-point MSE lower bound split into the CRLB trace and the squared
/// linearized NLOS bias. Unobservable points carry +inf in every field.
struct PointBound {
  Vec3 point = Vec3::Zero();
  double mse_lb = kInfinity;
  double variance_term = kInfinity;
  double bias_term = kInfinity;
  double conditioning = kInfinity;
  bool observable = false;

  double rmse() const { return std::sqrt(mse_lb); }
};

struct MetricReport {
  std::vector<PointBound> per_point;
  double aggregate_rmse = kInfinity;
};

/// Fisher information of the tag position for the scheduled pairs, zero
/// lever arm. Occluded links use the inflated variance.
Mat3 fim(const Vec3& point, const AnchorPlacement& placement, const Environment& env,
         const TdoaParams& params);

PointBound mse_lower_bound(const Vec3& point, const AnchorPlacement& placement, const Environment& env,
                           const TdoaParams& params);

/// Mean of √M over the targets; +inf as soon as one point is unobservable.
MetricReport placement_metric(const TargetSet& targets, const AnchorPlacement& placement,
                              const Environment& env, const TdoaParams& params);

struct HeatmapCell {
  double x = 0.0;
  double y = 0.0;
  double rmse_lb = kInfinity;
};

struct Heatmap {
  int nx = 0;
  int ny = 0;
  double height = 0.0;
  std::vector<HeatmapCell> cells;  // row-major, y outer
};

/// √M on the cell centres of a horizontal grid over the boundary footprint.
Heatmap heatmap(const Environment& env, const AnchorPlacement& placement, const TdoaParams& params,
                double height, double resolution);

struct PlacementSearchSpace {
  std::vector<Vec3> candidates;
  double min_pair_separation = 0.5;
  std::vector<int> fixed_anchors;  // 1-based, never moved

  /// Lattice points on the faces of the boundary box, spacing <= resolution,
  /// skipping points on or inside an obstacle.
  static PlacementSearchSpace boundary_grid(const Environment& env, double resolution);
};

struct BcmConfig {
  int max_sweeps = 20;
  double tol = 1e-6;
};

struct BcmResult {
  AnchorPlacement placement;
  MetricReport report;
  double initial_metric = kInfinity;
  std::vector<double> history;  // metric after each sweep
  int sweeps = 0;
};

BcmResult bcm_optimize(const TargetSet& targets, const PlacementSearchSpace& search,
                       const AnchorPlacement& initial, const Environment& env, const TdoaParams& params,
                       const BcmConfig& config = {});

enum class Pairing { Ring, Disjoint };

struct EscalationConfig {
  double rmse_target = 0.2;
  int min_anchors = 4;
  int max_anchors = 16;
  Pairing pairing = Pairing::Ring;
  TdoaMode mode = TdoaMode::Centralized;
  BcmConfig bcm{10, 1e-4};
  std::size_t start_candidate = 0;
};

struct EscalationStep {
  int anchor_count = 0;
  double aggregate_rmse = kInfinity;
  int sweeps = 0;
};

struct EscalationResult {
  AnchorPlacement placement;
  int anchor_count = 0;
  MetricReport report;
  std::vector<double> history;
  bool success = false;
  std::vector<EscalationStep> steps;
};

/// Farthest-point selection of `count` candidates, starting from `start`.
std::vector<Vec3> spread_initialization(const PlacementSearchSpace& search, int count, std::size_t start);

EscalationResult escalate_anchor_count(const TargetSet& targets, const PlacementSearchSpace& search,
                                       const Environment& env, const TdoaParams& params,
                                       const EscalationConfig& config);

}  // namespace tdoa
