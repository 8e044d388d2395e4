#include "core/placement.hpp"

#include "core/errors.hpp"
#include "core/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace tdoa {

namespace {

// Geometry of one tag-anchor leg at a fixed tag position.
struct Leg {
  Vec3 u = Vec3::Zero();  // unit vector anchor -> tag
  double penetration = 0.0;
  bool occluded = false;
  bool degenerate = false;
};

Leg make_leg(const Vec3& point, const Vec3& anchor, const Environment& env) {
  Leg leg;
  const Vec3 d = point - anchor;
  const double r = d.norm();
  if (r < 1e-9) {
    leg.degenerate = true;
    return leg;
  }
  leg.u = d / r;
  leg.penetration = penetration_length(point, anchor, env);
  leg.occluded = leg.penetration > 0.0;
  return leg;
}

struct Accumulated {
  Mat3 info = Mat3::Zero();
  Vec3 bias_drive = Vec3::Zero();  // Σ g b / σ²
  bool degenerate = false;
};

template <class LegOf>
Accumulated accumulate(const std::vector<AnchorPair>& pairs, const TdoaParams& params, LegOf&& leg_of) {
  Accumulated acc;
  const double kappa = params.nlos_bias_per_meter;
  for (const auto& pair : pairs) {
    const Leg& li = leg_of(pair.i);
    const Leg& lj = leg_of(pair.j);
    if (li.degenerate || lj.degenerate) {
      acc.degenerate = true;
      return acc;
    }
    const Vec3 g = lj.u - li.u;
    const double weight = 1.0 / params.link_variance(li.occluded || lj.occluded);
    acc.info += weight * g * g.transpose();
    acc.bias_drive += weight * g * (kappa * (lj.penetration - li.penetration));
  }
  return acc;
}

PointBound bound_from(const Vec3& point, const Accumulated& acc) {
  PointBound out;
  out.point = point;
  if (acc.degenerate) return out;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(acc.info);
  const Vec3 lambda = eig.eigenvalues();
  const double lo = lambda.minCoeff();
  const double hi = lambda.maxCoeff();
  if (!(lo > 0.0) || hi / lo > kConditionCutoff) {
    out.conditioning = lo > 0.0 ? hi / lo : kInfinity;
    return out;
  }
  const Mat3& v = eig.eigenvectors();
  const Mat3 inverse = v * lambda.cwiseInverse().asDiagonal() * v.transpose();
  const Vec3 delta = inverse * acc.bias_drive;
  out.variance_term = lambda.cwiseInverse().sum();
  out.bias_term = delta.squaredNorm();
  out.mse_lb = out.variance_term + out.bias_term;
  out.conditioning = hi / lo;
  out.observable = true;
  return out;
}

double aggregate(const std::vector<PointBound>& bounds) {
  double sum = 0.0;
  for (const auto& b : bounds) {
    if (!b.observable) return kInfinity;
    sum += std::sqrt(b.mse_lb);
  }
  return sum / static_cast<double>(bounds.size());
}

void check_pairs(const AnchorPlacement& placement) {
  const int m = static_cast<int>(placement.size());
  for (const auto& p : placement.pairs) {
    if (p.i < 1 || p.i > m || p.j < 1 || p.j > m) {
      throw invalid_argument("pair (" + std::to_string(p.i) + "," + std::to_string(p.j) + ") out of range");
    }
  }
}

}  // namespace

Mat3 fim(const Vec3& point, const AnchorPlacement& placement, const Environment& env,
         const TdoaParams& params) {
  check_pairs(placement);
  std::vector<Leg> legs;
  legs.reserve(placement.size());
  for (const auto& a : placement.anchors) legs.push_back(make_leg(point, a, env));
  const auto acc = accumulate(placement.pairs, params, [&](int idx) -> const Leg& { return legs[idx - 1]; });
  if (acc.degenerate) throw degenerate_geometry("point coincides with an anchor");
  return acc.info;
}

PointBound mse_lower_bound(const Vec3& point, const AnchorPlacement& placement, const Environment& env,
                           const TdoaParams& params) {
  check_pairs(placement);
  std::vector<Leg> legs;
  legs.reserve(placement.size());
  for (const auto& a : placement.anchors) legs.push_back(make_leg(point, a, env));
  const auto acc = accumulate(placement.pairs, params, [&](int idx) -> const Leg& { return legs[idx - 1]; });
  if (acc.degenerate) throw degenerate_geometry("point coincides with an anchor");
  return bound_from(point, acc);
}

MetricReport placement_metric(const TargetSet& targets, const AnchorPlacement& placement,
                              const Environment& env, const TdoaParams& params) {
  if (targets.points.empty()) throw invalid_argument("target set is empty");
  MetricReport report;
  report.per_point.reserve(targets.points.size());
  for (const auto& p : targets.points) report.per_point.push_back(mse_lower_bound(p, placement, env, params));
  report.aggregate_rmse = aggregate(report.per_point);
  return report;
}

Heatmap heatmap(const Environment& env, const AnchorPlacement& placement, const TdoaParams& params,
                double height, double resolution) {
  if (!(resolution > 0.0)) throw invalid_argument("heatmap resolution must be positive");
  Heatmap map;
  map.height = height;
  const Vec3 lo = env.boundary.min;
  const Vec3 extent = env.boundary.extent();
  map.nx = std::max(1, static_cast<int>(std::ceil(extent.x() / resolution - 1e-9)));
  map.ny = std::max(1, static_cast<int>(std::ceil(extent.y() / resolution - 1e-9)));
  map.cells.resize(static_cast<std::size_t>(map.nx) * static_cast<std::size_t>(map.ny));
  parallel_for(map.cells.size(), [&](std::size_t idx) {
    const int ix = static_cast<int>(idx % static_cast<std::size_t>(map.nx));
    const int iy = static_cast<int>(idx / static_cast<std::size_t>(map.nx));
    HeatmapCell cell;
    cell.x = std::min(lo.x() + (ix + 0.5) * resolution, env.boundary.max.x());
    cell.y = std::min(lo.y() + (iy + 0.5) * resolution, env.boundary.max.y());
    try {
      cell.rmse_lb = mse_lower_bound(Vec3(cell.x, cell.y, height), placement, env, params).rmse();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateGeometry) throw;
      cell.rmse_lb = kInfinity;
    }
    map.cells[idx] = cell;
  });
  return map;
}

PlacementSearchSpace PlacementSearchSpace::boundary_grid(const Environment& env, double resolution) {
  if (!(resolution > 0.0)) throw invalid_argument("candidate resolution must be positive");
  const Vec3 extent = env.boundary.extent();
  int n[3];
  for (int k = 0; k < 3; ++k) n[k] = std::max(1, static_cast<int>(std::ceil(extent[k] / resolution - 1e-9)));
  auto coord = [&](int axis, int idx) {
    return idx == n[axis] ? env.boundary.max[axis]
                          : env.boundary.min[axis] + extent[axis] * idx / n[axis];
  };

  PlacementSearchSpace space;
  for (int ix = 0; ix <= n[0]; ++ix) {
    for (int iy = 0; iy <= n[1]; ++iy) {
      const bool side = ix == 0 || ix == n[0] || iy == 0 || iy == n[1];
      for (int iz = 0; iz <= n[2]; ++iz) {
        if (!side && iz != 0 && iz != n[2]) continue;
        const Vec3 p(coord(0, ix), coord(1, iy), coord(2, iz));
        const bool blocked = std::any_of(env.obstacles.begin(), env.obstacles.end(),
                                         [&](const Obstacle& o) { return o.contains(p); });
        if (!blocked) space.candidates.push_back(p);
      }
    }
  }
  return space;
}

namespace {

// Incremental evaluator: leg tables for the current anchors and for every
// candidate, so moving one anchor only re-assembles the affected sums.
class BcmEvaluator {
 public:
  BcmEvaluator(const TargetSet& targets, const PlacementSearchSpace& search, const AnchorPlacement& placement,
               const Environment& env, const TdoaParams& params)
      : targets_(targets), params_(params), pairs_(placement.pairs), env_(env) {
    anchor_legs_.resize(placement.size());
    for (std::size_t a = 0; a < placement.size(); ++a) anchor_legs_[a] = legs_for(placement.anchors[a]);
    candidate_legs_.resize(search.candidates.size());
    parallel_for(search.candidates.size(),
                 [&](std::size_t c) { candidate_legs_[c] = legs_for(search.candidates[c]); });
  }

  // Metric with anchor `moved` (0-based) replaced by the candidate's legs.
  double metric_with(std::size_t moved, const std::vector<Leg>* replacement) const {
    double sum = 0.0;
    for (std::size_t p = 0; p < targets_.points.size(); ++p) {
      const auto acc = accumulate(pairs_, params_, [&](int idx) -> const Leg& {
        const auto a = static_cast<std::size_t>(idx - 1);
        return (replacement != nullptr && a == moved) ? (*replacement)[p] : anchor_legs_[a][p];
      });
      const auto bound = bound_from(targets_.points[p], acc);
      if (!bound.observable) return kInfinity;
      sum += std::sqrt(bound.mse_lb);
    }
    return sum / static_cast<double>(targets_.points.size());
  }

  double metric() const { return metric_with(0, nullptr); }
  const std::vector<Leg>& candidate(std::size_t c) const { return candidate_legs_[c]; }
  void move(std::size_t anchor, std::size_t c) { anchor_legs_[anchor] = candidate_legs_[c]; }

 private:
  std::vector<Leg> legs_for(const Vec3& anchor) const {
    std::vector<Leg> legs;
    legs.reserve(targets_.points.size());
    for (const auto& p : targets_.points) legs.push_back(make_leg(p, anchor, env_));
    return legs;
  }

  const TargetSet& targets_;
  const TdoaParams& params_;
  std::vector<AnchorPair> pairs_;
  const Environment& env_;
  std::vector<std::vector<Leg>> anchor_legs_;
  std::vector<std::vector<Leg>> candidate_legs_;
};

}  // namespace

BcmResult bcm_optimize(const TargetSet& targets, const PlacementSearchSpace& search,
                       const AnchorPlacement& initial, const Environment& env, const TdoaParams& params,
                       const BcmConfig& config) {
  if (search.candidates.empty()) throw invalid_argument("candidate set is empty");
  if (targets.points.empty()) throw invalid_argument("target set is empty");
  initial.validate();

  BcmResult result;
  result.placement = initial;
  BcmEvaluator evaluator(targets, search, initial, env, params);
  double current = evaluator.metric();
  result.initial_metric = current;

  auto fixed = [&](std::size_t a) {
    return std::find(search.fixed_anchors.begin(), search.fixed_anchors.end(), static_cast<int>(a + 1)) !=
           search.fixed_anchors.end();
  };

  std::vector<double> values(search.candidates.size());
  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    const double start = current;
    for (std::size_t a = 0; a < result.placement.size(); ++a) {
      if (fixed(a)) continue;
      parallel_for(search.candidates.size(), [&](std::size_t c) {
        const Vec3& cand = search.candidates[c];
        for (std::size_t other = 0; other < result.placement.size(); ++other) {
          if (other != a && (result.placement.anchors[other] - cand).norm() < search.min_pair_separation) {
            values[c] = kInfinity;
            return;
          }
        }
        values[c] = evaluator.metric_with(a, &evaluator.candidate(c));
      });
      // Lowest index wins ties; a move must strictly improve.
      std::size_t best = 0;
      for (std::size_t c = 1; c < values.size(); ++c) {
        if (values[c] < values[best]) best = c;
      }
      if (values[best] < current) {
        current = values[best];
        result.placement.anchors[a] = search.candidates[best];
        evaluator.move(a, best);
      }
    }
    result.history.push_back(current);
    result.sweeps = sweep + 1;
    if (!(start - current >= config.tol) || current == start) break;
  }
  result.report = placement_metric(targets, result.placement, env, params);
  return result;
}

std::vector<Vec3> spread_initialization(const PlacementSearchSpace& search, int count, std::size_t start) {
  if (search.candidates.empty()) throw invalid_argument("candidate set is empty");
  if (count < 1 || static_cast<std::size_t>(count) > search.candidates.size()) {
    throw invalid_argument("cannot pick " + std::to_string(count) + " anchors from " +
                           std::to_string(search.candidates.size()) + " candidates");
  }
  const auto& cands = search.candidates;
  std::vector<Vec3> picked{cands[start % cands.size()]};
  std::vector<double> nearest(cands.size());
  for (std::size_t c = 0; c < cands.size(); ++c) nearest[c] = (cands[c] - picked.front()).norm();
  while (static_cast<int>(picked.size()) < count) {
    std::size_t far = 0;
    for (std::size_t c = 1; c < cands.size(); ++c) {
      if (nearest[c] > nearest[far]) far = c;
    }
    picked.push_back(cands[far]);
    for (std::size_t c = 0; c < cands.size(); ++c) nearest[c] = std::min(nearest[c], (cands[c] - cands[far]).norm());
  }
  return picked;
}

EscalationResult escalate_anchor_count(const TargetSet& targets, const PlacementSearchSpace& search,
                                       const Environment& env, const TdoaParams& params,
                                       const EscalationConfig& config) {
  if (config.min_anchors < 2 || config.max_anchors < config.min_anchors) {
    throw invalid_argument("anchor count range must satisfy 2 <= min <= max");
  }
  if (config.pairing == Pairing::Disjoint && config.min_anchors % 2 != 0) {
    throw invalid_argument("disjoint pairing needs an even minimum anchor count");
  }

  EscalationResult best;
  for (int m = config.min_anchors; m <= config.max_anchors; m += 2) {
    AnchorPlacement init;
    init.anchors = spread_initialization(search, m, config.start_candidate);
    init.pairs = config.pairing == Pairing::Disjoint ? disjoint_pairs(m) : ring_pairs(m);
    init.mode = config.mode;
    auto run = bcm_optimize(targets, search, init, env, params, config.bcm);
    best.steps.push_back({m, run.report.aggregate_rmse, run.sweeps});

    const bool improves = best.anchor_count == 0 || run.report.aggregate_rmse < best.report.aggregate_rmse;
    const bool met = run.report.aggregate_rmse <= config.rmse_target;
    if (improves || met) {
      best.placement = std::move(run.placement);
      best.anchor_count = m;
      best.report = std::move(run.report);
      best.history = std::move(run.history);
    }
    if (met) {
      best.success = true;
      break;
    }
  }
  return best;
}

}  // namespace tdoa
