#pragma once

#include "core/eskf.hpp"
#include "core/estimator.hpp"
#include "core/geometry.hpp"
#include "core/measurement.hpp"
#include "core/placement.hpp"
#include "core/profiles.hpp"
#include "core/trajectory.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tdoa {

enum class TrajectoryKind { Waypoints, Lissajous, Stairs };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Waypoints;
  TimingProfile timing;
  double static_duration = 10.0;  // s, used when the path has zero length

  std::vector<Vec3> waypoints;

  Vec3 center = Vec3::Zero();
  Vec3 amplitude = Vec3::Zero();
  Vec3 frequency = Vec3::Ones();
  Vec3 phase = Vec3::Zero();
  double laps = 1.0;

  // Switchback staircase: landing, then an inclined flight, then a lateral
  // shift by `width` and a reversal for the next flight.
  Vec3 start = Vec3::Zero();
  double heading = 0.0;  // rad
  int flights = 2;
  double rise = 1.5;     // m per flight
  double run = 3.0;      // m per flight
  double landing = 1.0;  // m
  double width = 1.2;    // m
};

/// Waypoints of the staircase path before smoothing.
std::vector<Vec3> stair_waypoints(const TrajectorySpec& spec);

/// Builds the trajectory; when `bounds` is given, every defining point must
/// lie inside it.
Trajectory gen_trajectory(const TrajectorySpec& spec, const Box* bounds = nullptr);

struct SimRates {
  double imu = 200.0;  // Hz
  double tdoa = 50.0;  // Hz, total over the pair cycle
  double gt = 100.0;   // Hz
};

struct Scenario {
  std::string name;
  Environment env;
  AnchorPlacement placement;
  TrajectorySpec trajectory;
  ImuParams imu;
  TdoaParams tdoa;
  TdoaSynthConfig synth;
  SimRates rates;
  std::uint64_t seed = 1;
  ProfileName profile = ProfileName::Arena;
  EskfConfig eskf;      // resolved from the profile plus lever arm and IMU densities
  double warmup = 2.0;  // s excluded from the evaluation

  void validate() const;
};

/// Filter configuration for a scenario: profile numbers, the scenario IMU
/// densities and the synthesis lever arm.
EskfConfig resolve_eskf(ProfileName profile, const ImuParams& imu, const Vec3& lever_arm);

struct GroundTruthPoint {
  double t = 0.0;
  Pose pose;
  Vec3 velocity = Vec3::Zero();
};

struct EvalSummary {
  double rmse = std::numeric_limits<double>::quiet_NaN();
  Vec3 axis_rmse = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  double max_error = std::numeric_limits<double>::quiet_NaN();
  double mean_nees = std::numeric_limits<double>::quiet_NaN();  // position block, 3 dof
  double reject_rate = 0.0;
  double bound_rmse = std::numeric_limits<double>::quiet_NaN();
  std::size_t samples = 0;
  bool diverged = false;
  double divergence_time = std::numeric_limits<double>::quiet_NaN();
};

struct RmseOptions {
  double warmup = 2.0;
};

/// Linear interpolation of the ground-truth position (and slerp of the
/// orientation) at time t. Requires t inside the log's time range.
GroundTruthPoint interpolate(std::span<const GroundTruthPoint> gt, double t);

/// Position error statistics over the estimate timestamps after the warm-up,
/// against linearly interpolated ground truth.
EvalSummary rmse(std::span<const EstimateSample> est, std::span<const GroundTruthPoint> gt,
                 const RmseOptions& options = {});

struct ErrorCurveRow {
  double t = 0.0;
  double err = 0.0;
  double bound = 0.0;
};

/// Per-timestep position error and √M at the interpolated true tag position.
std::vector<ErrorCurveRow> error_curve(std::span<const EstimateSample> est, std::span<const GroundTruthPoint> gt,
                                       const AnchorPlacement& placement, const Environment& env,
                                       const TdoaParams& params, const Vec3& lever_arm, double warmup);

/// Average bound over the true trajectory sampled at 1 Hz after the warm-up.
double trajectory_bound(const Trajectory& trajectory, const Scenario& scenario);

struct ScenarioRun {
  MeasurementLog log;  // imu, tdoa and ground truth merged in time order
  std::vector<GroundTruthPoint> ground_truth;
  EstimatorRun estimator;
  EvalSummary summary;
};

std::vector<GroundTruthPoint> ground_truth_points(const MeasurementLog& log);

/// Synthesizes the measurement log for a seed (deterministic).
MeasurementLog synthesize_log(const Scenario& scenario, const Trajectory& trajectory, std::uint64_t seed);

ScenarioRun run_scenario(const Scenario& scenario);
ScenarioRun run_scenario(const Scenario& scenario, std::uint64_t seed);

struct MonteCarloSummary {
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  double mean_nees = 0.0;
  double mean_bound = 0.0;
  int diverged_trials = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<EvalSummary> trials;
};

/// Trials use seeds base_seed + k and run concurrently; aggregation is in
/// trial order.
MonteCarloSummary run_monte_carlo(const Scenario& scenario, int trials, std::uint64_t base_seed);

/// Independent stream seed for a (seed, stream) pair.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace tdoa
