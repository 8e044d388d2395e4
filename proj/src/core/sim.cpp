#include "core/sim.hpp"

#include "core/errors.hpp"
#include "core/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tdoa {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<Vec3> stair_waypoints(const TrajectorySpec& spec) {
  if (spec.flights < 1) throw invalid_argument("stairs need at least one flight");
  Vec3 dir(std::cos(spec.heading), std::sin(spec.heading), 0.0);
  const Vec3 lateral(-std::sin(spec.heading), std::cos(spec.heading), 0.0);
  Vec3 p = spec.start;
  std::vector<Vec3> pts{p};
  for (int f = 0; f < spec.flights; ++f) {
    p += dir * spec.landing;
    pts.push_back(p);
    p += dir * spec.run + Vec3::UnitZ() * spec.rise;
    pts.push_back(p);
    p += dir * spec.landing;
    pts.push_back(p);
    if (f + 1 < spec.flights) {
      p += lateral * spec.width;
      pts.push_back(p);
      dir = -dir;
    }
  }
  return pts;
}

Trajectory gen_trajectory(const TrajectorySpec& spec, const Box* bounds) {
  auto check = [&](const Vec3& p, const char* what) {
    if (bounds != nullptr && !bounds->contains(p, 1e-9)) {
      throw invalid_argument(std::string(what) + " outside the environment boundary");
    }
  };

  std::shared_ptr<const Curve> curve;
  switch (spec.kind) {
    case TrajectoryKind::Waypoints: {
      if (spec.waypoints.size() < 2) throw invalid_argument("waypoint trajectory needs at least two waypoints");
      for (const auto& w : spec.waypoints) check(w, "waypoint");
      curve = std::make_shared<CubicSplineCurve>(spec.waypoints);
      break;
    }
    case TrajectoryKind::Lissajous: {
      check(spec.center + spec.amplitude.cwiseAbs(), "lissajous extent");
      check(spec.center - spec.amplitude.cwiseAbs(), "lissajous extent");
      curve = std::make_shared<LissajousCurve>(spec.center, spec.amplitude, spec.frequency, spec.phase, spec.laps);
      break;
    }
    case TrajectoryKind::Stairs: {
      const auto pts = stair_waypoints(spec);
      for (const auto& w : pts) check(w, "stair waypoint");
      curve = std::make_shared<CubicSplineCurve>(pts);
      break;
    }
  }
  return Trajectory(curve, spec.timing, spec.static_duration);
}

void Scenario::validate() const {
  env.validate();
  placement.validate();
  tdoa.validate();
  imu.validate(true);
  eskf.validate();
  if (!(rates.imu > 0.0) || !(rates.tdoa > 0.0) || !(rates.gt > 0.0)) {
    throw invalid_argument("scenario rates must be positive");
  }
  if (!(warmup >= 0.0)) throw invalid_argument("warmup must be non-negative");
}

EskfConfig resolve_eskf(ProfileName profile, const ImuParams& imu, const Vec3& lever_arm) {
  EskfConfig cfg = make_profile(profile).eskf;
  cfg.imu = imu;
  cfg.lever_arm = lever_arm;
  return cfg;
}

GroundTruthPoint interpolate(std::span<const GroundTruthPoint> gt, double t) {
  if (gt.empty() || t < gt.front().t || t > gt.back().t) {
    throw invalid_argument("time outside the ground-truth range");
  }
  auto it = std::upper_bound(gt.begin(), gt.end(), t, [](double v, const GroundTruthPoint& g) { return v < g.t; });
  if (it == gt.end()) return gt.back();
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double span = hi.t - lo.t;
  const double alpha = span > 0.0 ? (t - lo.t) / span : 0.0;
  GroundTruthPoint out;
  out.t = t;
  out.pose.position = (1.0 - alpha) * lo.pose.position + alpha * hi.pose.position;
  out.pose.orientation = UnitQuaternion(lo.pose.orientation.eigen().slerp(alpha, hi.pose.orientation.eigen()));
  out.velocity = (1.0 - alpha) * lo.velocity + alpha * hi.velocity;
  return out;
}

EvalSummary rmse(std::span<const EstimateSample> est, std::span<const GroundTruthPoint> gt,
                 const RmseOptions& options) {
  if (est.empty() || gt.empty()) throw invalid_argument("rmse needs non-empty estimate and ground-truth logs");
  const double start = est.front().t + options.warmup;

  EvalSummary out;
  Vec3 sq = Vec3::Zero();
  double max_err = 0.0;
  double nees_sum = 0.0;
  std::size_t nees_count = 0;
  std::size_t n = 0;
  for (const auto& e : est) {
    if (e.t < start || e.t < gt.front().t || e.t > gt.back().t) continue;
    const Vec3 err = e.state.p - interpolate(gt, e.t).pose.position;
    sq += err.cwiseAbs2();
    max_err = std::max(max_err, err.norm());
    Eigen::LDLT<Mat3> ldlt(e.P_pos);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
      nees_sum += err.dot(ldlt.solve(err));
      ++nees_count;
    }
    ++n;
  }
  if (n == 0) throw invalid_argument("estimate and ground-truth logs do not overlap after the warm-up");
  out.samples = n;
  out.axis_rmse = (sq / static_cast<double>(n)).cwiseSqrt();
  out.rmse = std::sqrt(sq.sum() / static_cast<double>(n));
  out.max_error = max_err;
  if (nees_count > 0) out.mean_nees = nees_sum / static_cast<double>(nees_count);
  return out;
}

std::vector<ErrorCurveRow> error_curve(std::span<const EstimateSample> est, std::span<const GroundTruthPoint> gt,
                                       const AnchorPlacement& placement, const Environment& env,
                                       const TdoaParams& params, const Vec3& lever_arm, double warmup) {
  std::vector<ErrorCurveRow> rows;
  if (est.empty() || gt.empty()) return rows;
  const double start = est.front().t + warmup;
  for (const auto& e : est) {
    if (e.t < start || e.t < gt.front().t || e.t > gt.back().t) continue;
    const auto truth = interpolate(gt, e.t);
    ErrorCurveRow row;
    row.t = e.t;
    row.err = (e.state.p - truth.pose.position).norm();
    try {
      row.bound = mse_lower_bound(tag_position(truth.pose, lever_arm), placement, env, params).rmse();
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::DegenerateGeometry) throw;
      row.bound = kInfinity;
    }
    rows.push_back(row);
  }
  return rows;
}

double trajectory_bound(const Trajectory& trajectory, const Scenario& scenario) {
  TargetSet targets;
  for (double t = std::ceil(scenario.warmup); t <= trajectory.duration() + 1e-9; t += 1.0) {
    targets.points.push_back(tag_position(trajectory.at(t).pose, scenario.synth.lever_arm));
  }
  if (targets.points.empty()) return std::numeric_limits<double>::quiet_NaN();
  return placement_metric(targets, scenario.placement, scenario.env, scenario.tdoa).aggregate_rmse;
}

std::vector<GroundTruthPoint> ground_truth_points(const MeasurementLog& log) {
  std::vector<GroundTruthPoint> out;
  for (const auto& rec : log) {
    if (const auto* gt = std::get_if<GroundTruthSample>(&rec.payload)) {
      out.push_back({rec.t, gt->pose, gt->velocity});
    }
  }
  return out;
}

MeasurementLog synthesize_log(const Scenario& scenario, const Trajectory& trajectory, std::uint64_t seed) {
  MeasurementLog log;
  const auto gt_count = static_cast<long>(std::floor(trajectory.duration() * scenario.rates.gt + 1e-9));
  for (long k = 0; k <= gt_count; ++k) {
    const double t = static_cast<double>(k) / scenario.rates.gt;
    const auto truth = trajectory.at(t);
    log.push_back({t, GroundTruthSample{truth.pose, truth.velocity}});
  }
  auto imu = synth_imu(trajectory, scenario.imu, scenario.rates.imu, derive_seed(seed, 1));
  TdoaSynthConfig synth = scenario.synth;
  synth.rate = scenario.rates.tdoa;
  auto tdoa = synth_tdoa(trajectory, scenario.placement, scenario.env, scenario.tdoa, synth, derive_seed(seed, 2));
  log.insert(log.end(), imu.begin(), imu.end());
  log.insert(log.end(), tdoa.begin(), tdoa.end());
  std::stable_sort(log.begin(), log.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  return log;
}

ScenarioRun run_scenario(const Scenario& scenario) { return run_scenario(scenario, scenario.seed); }

ScenarioRun run_scenario(const Scenario& scenario, std::uint64_t seed) {
  scenario.validate();
  const auto trajectory = gen_trajectory(scenario.trajectory, &scenario.env.boundary);

  ScenarioRun run;
  run.log = synthesize_log(scenario, trajectory, seed);
  run.ground_truth = ground_truth_points(run.log);
  run.estimator = run_estimator(run.log, scenario.placement, scenario.eskf);

  if (!run.estimator.estimates.empty()) {
    try {
      run.summary = rmse(run.estimator.estimates, run.ground_truth, {scenario.warmup});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidArgument) throw;
    }
  }
  run.summary.reject_rate = run.estimator.gating.reject_rate;
  run.summary.diverged = run.estimator.diverged || !run.estimator.initialized;
  run.summary.divergence_time = run.estimator.divergence_time;
  run.summary.bound_rmse = trajectory_bound(trajectory, scenario);
  return run;
}

MonteCarloSummary run_monte_carlo(const Scenario& scenario, int trials, std::uint64_t base_seed) {
  if (trials < 1) throw invalid_argument("Monte-Carlo needs at least one trial");
  MonteCarloSummary out;
  out.trials.resize(static_cast<std::size_t>(trials));
  out.seeds.resize(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t k) {
    out.seeds[k] = base_seed + k;
    out.trials[k] = run_scenario(scenario, out.seeds[k]).summary;
  });

  double sum = 0.0, nees = 0.0, bound = 0.0;
  int finite = 0, nees_count = 0;
  for (const auto& t : out.trials) {
    if (t.diverged) ++out.diverged_trials;
    if (std::isfinite(t.rmse)) {
      sum += t.rmse;
      bound += t.bound_rmse;
      ++finite;
    }
    if (std::isfinite(t.mean_nees)) {
      nees += t.mean_nees;
      ++nees_count;
    }
  }
  out.mean_rmse = finite > 0 ? sum / finite : std::numeric_limits<double>::quiet_NaN();
  out.mean_bound = finite > 0 ? bound / finite : std::numeric_limits<double>::quiet_NaN();
  out.mean_nees = nees_count > 0 ? nees / nees_count : std::numeric_limits<double>::quiet_NaN();
  double var = 0.0;
  for (const auto& t : out.trials) {
    if (std::isfinite(t.rmse)) var += (t.rmse - out.mean_rmse) * (t.rmse - out.mean_rmse);
  }
  out.std_rmse = finite > 1 ? std::sqrt(var / (finite - 1)) : 0.0;
  return out;
}

}  // namespace tdoa
