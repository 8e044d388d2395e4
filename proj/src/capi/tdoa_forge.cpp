#include "tdoa_forge/tdoa_forge.h"

#include "core/errors.hpp"
#include "core/placement.hpp"
#include "core/profiles.hpp"
#include "core/sim.hpp"
#include "io/files.hpp"

#include <cmath>
#include <filesystem>
#include <string>

struct tf_environment {
  tdoa::Environment value;
};

struct tf_placement {
  tdoa::AnchorPlacement value;
};

struct tf_targets {
  tdoa::TargetSet value;
};

struct tf_scenario {
  tdoa::Scenario value;
};

namespace {

thread_local std::string last_error;

tf_status fail(tf_status status, const std::string& message) {
  last_error = message;
  return status;
}

tf_status from_kind(tdoa::ErrorKind kind) {
  switch (kind) {
    case tdoa::ErrorKind::InvalidArgument:
    case tdoa::ErrorKind::Input: return TF_ERR_INPUT;
    case tdoa::ErrorKind::DegenerateGeometry: return TF_ERR_DEGENERATE;
    case tdoa::ErrorKind::Divergence: return TF_ERR_DIVERGENCE;
    case tdoa::ErrorKind::Io: return TF_ERR_IO;
  }
  return TF_ERR_INTERNAL;
}

// No exception crosses the C boundary.
template <class Body>
tf_status guarded(Body&& body) noexcept {
  try {
    last_error.clear();
    return body();
  } catch (const tdoa::Error& e) {
    return fail(from_kind(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TF_ERR_INTERNAL, e.what());
  }
}

tf_status null_argument(const char* name) { return fail(TF_ERR_INPUT, std::string(name) + " must not be NULL"); }

tdoa::Profile profile_or_throw(const char* name) {
  const auto profile = tdoa::parse_profile(name != nullptr ? name : "arena");
  if (!profile) throw tdoa::invalid_argument(std::string("unknown profile \"") + name + "\"");
  return tdoa::make_profile(*profile);
}

tdoa::ProfileName profile_name_or_throw(const char* name) {
  const auto profile = tdoa::parse_profile(name != nullptr ? name : "arena");
  if (!profile) throw tdoa::invalid_argument(std::string("unknown profile \"") + name + "\"");
  return *profile;
}

template <class Handle, class Loader>
tf_status load_handle(const char* path, Handle** out, Loader loader) {
  if (path == nullptr) return null_argument("path");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    *out = new Handle{loader(path)};
    return TF_OK;
  });
}

}  // namespace

extern "C" {

const char* tf_last_error(void) { return last_error.c_str(); }

const char* tf_version(void) { return "0.1.0"; }

tf_status tf_environment_load(const char* path, tf_environment** out) {
  return load_handle(path, out, [](const char* p) { return tdoa::io::load_environment(p); });
}

void tf_environment_free(tf_environment* env) { delete env; }

tf_status tf_placement_load(const char* path, tf_placement** out) {
  return load_handle(path, out, [](const char* p) {
    auto placement = tdoa::io::load_placement(p);
    placement.validate();
    return placement;
  });
}

tf_status tf_placement_save(const tf_placement* placement, const char* path) {
  if (placement == nullptr) return null_argument("placement");
  if (path == nullptr) return null_argument("path");
  return guarded([&] {
    tdoa::io::save_placement(path, placement->value);
    return TF_OK;
  });
}

size_t tf_placement_anchor_count(const tf_placement* placement) {
  return placement != nullptr ? placement->value.size() : 0;
}

void tf_placement_free(tf_placement* placement) { delete placement; }

tf_status tf_targets_load(const char* path, tf_targets** out) {
  return load_handle(path, out, [](const char* p) { return tdoa::io::load_targets(p); });
}

void tf_targets_free(tf_targets* targets) { delete targets; }

tf_status tf_scenario_load(const char* path, tf_scenario** out) {
  return load_handle(path, out, [](const char* p) { return tdoa::io::load_scenario(p); });
}

void tf_scenario_free(tf_scenario* scenario) { delete scenario; }

int tf_profile_valid(const char* name) { return name != nullptr && tdoa::parse_profile(name).has_value() ? 1 : 0; }

tf_status tf_tdoa_predict(const tf_placement* placement, int i, int j, const double position[3],
                          const double quaternion[4], const double lever_arm[3], double* out) {
  if (placement == nullptr || position == nullptr || quaternion == nullptr || out == nullptr) {
    return null_argument("placement, position, quaternion and out");
  }
  return guarded([&] {
    const auto m = static_cast<int>(placement->value.size());
    if (i < 1 || i > m || j < 1 || j > m || i == j) {
      throw tdoa::invalid_argument("anchor pair out of range");
    }
    tdoa::Pose pose;
    pose.position = tdoa::Vec3(position[0], position[1], position[2]);
    pose.orientation = tdoa::UnitQuaternion(quaternion[0], quaternion[1], quaternion[2], quaternion[3]);
    const tdoa::Vec3 lever = lever_arm != nullptr ? tdoa::Vec3(lever_arm[0], lever_arm[1], lever_arm[2])
                                                  : tdoa::Vec3::Zero();
    *out = tdoa::tdoa_predict({i, j}, pose, lever, placement->value);
    return TF_OK;
  });
}

tf_status tf_rmse_lower_bound(const tf_environment* env, const tf_placement* placement, const double point[3],
                              const char* profile, double* out) {
  if (env == nullptr || placement == nullptr || point == nullptr || out == nullptr) {
    return null_argument("env, placement, point and out");
  }
  return guarded([&] {
    const auto params = profile_or_throw(profile).tdoa;
    *out = tdoa::mse_lower_bound(tdoa::Vec3(point[0], point[1], point[2]), placement->value, env->value, params)
               .rmse();
    return TF_OK;
  });
}

void tf_optimize_options_init(tf_optimize_options* options) {
  if (options == nullptr) return;
  options->rmse_target = 0.2;
  options->min_anchors = 4;
  options->max_anchors = 16;
  options->pairing = TF_PAIRING_RING;
  options->resolution = 0.25;
  options->seed = 0;
  options->max_sweeps = 10;
  options->tol = 1e-4;
  options->profile = "arena";
}

tf_status tf_placement_optimize(const tf_environment* env, const tf_targets* targets,
                                const tf_optimize_options* options, const char* placement_out,
                                const char* report_out, double* aggregate_rmse, int* anchor_count) {
  if (env == nullptr || targets == nullptr || options == nullptr) return null_argument("env, targets and options");
  if (placement_out == nullptr || report_out == nullptr) return null_argument("output paths");
  return guarded([&] {
    if (!(options->resolution > 0.0)) throw tdoa::invalid_argument("resolution must be positive");
    if (!(options->rmse_target > 0.0)) throw tdoa::invalid_argument("rmse target must be positive");
    const auto params = profile_or_throw(options->profile).tdoa;
    const auto search = tdoa::PlacementSearchSpace::boundary_grid(env->value, options->resolution);
    if (search.candidates.empty()) throw tdoa::invalid_argument("no candidate anchor positions");

    tdoa::EscalationConfig cfg;
    cfg.rmse_target = options->rmse_target;
    cfg.min_anchors = options->min_anchors;
    cfg.max_anchors = options->max_anchors;
    cfg.pairing = options->pairing == TF_PAIRING_DISJOINT ? tdoa::Pairing::Disjoint : tdoa::Pairing::Ring;
    cfg.mode = cfg.pairing == tdoa::Pairing::Disjoint ? tdoa::TdoaMode::Decentralized : tdoa::TdoaMode::Centralized;
    cfg.bcm.max_sweeps = options->max_sweeps;
    cfg.bcm.tol = options->tol;
    cfg.start_candidate = static_cast<std::size_t>(options->seed % search.candidates.size());

    const auto result = tdoa::escalate_anchor_count(targets->value, search, env->value, params, cfg);

    tdoa::io::ReportExtras extras;
    extras.sweeps = result.steps.empty() ? 0 : result.steps.back().sweeps;
    for (const auto& s : result.steps) {
      if (s.anchor_count == result.anchor_count) extras.sweeps = s.sweeps;
    }
    extras.history = result.history;
    extras.has_target = true;
    extras.rmse_target = cfg.rmse_target;
    extras.success = result.success;
    extras.anchor_count = result.anchor_count;
    extras.steps = result.steps;
    tdoa::io::save_placement(placement_out, result.placement);
    tdoa::io::save_report(report_out, result.report, extras);

    if (aggregate_rmse != nullptr) *aggregate_rmse = result.report.aggregate_rmse;
    if (anchor_count != nullptr) *anchor_count = result.anchor_count;
    if (!result.success) {
      return fail(TF_ERR_TARGET_NOT_MET, "rmse target not met with up to " + std::to_string(cfg.max_anchors) +
                                             " anchors; best aggregate " +
                                             tdoa::io::format_number(result.report.aggregate_rmse) + " m");
    }
    return TF_OK;
  });
}

tf_status tf_heatmap_write(const tf_environment* env, const tf_placement* placement, double height,
                           double resolution, const char* profile, const char* csv_out) {
  if (env == nullptr || placement == nullptr || csv_out == nullptr) return null_argument("env, placement and csv_out");
  return guarded([&] {
    if (!(resolution > 0.0) || !std::isfinite(resolution)) throw tdoa::invalid_argument("resolution must be positive");
    if (!std::isfinite(height)) throw tdoa::invalid_argument("height must be finite");
    const auto params = profile_or_throw(profile).tdoa;
    tdoa::io::save_heatmap_csv(csv_out, tdoa::heatmap(env->value, placement->value, params, height, resolution));
    return TF_OK;
  });
}

tf_status tf_sim_run(const tf_scenario* scenario, int trials, const char* out_dir) {
  if (scenario == nullptr || out_dir == nullptr) return null_argument("scenario and out_dir");
  return guarded([&] {
    if (trials < 1) throw tdoa::invalid_argument("trials must be at least 1");
    const auto& s = scenario->value;
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    const auto run = tdoa::run_scenario(s, s.seed);
    tdoa::io::save_log(dir / "log.jsonl", run.log);
    tdoa::io::save_estimates(dir / "estimates.jsonl", run.estimator.estimates);
    tdoa::io::save_gating(dir / "gating.json", run.estimator.gating);
    tdoa::io::save_summary(dir / "summary.json", run.summary);
    const auto curve = tdoa::error_curve(run.estimator.estimates, run.ground_truth, s.placement, s.env, s.tdoa,
                                         s.synth.lever_arm, s.warmup);
    tdoa::io::save_error_csv(dir / "errors.csv", curve);

    const auto mc = tdoa::run_monte_carlo(s, trials, s.seed);
    tdoa::io::save_monte_carlo(dir / "monte_carlo.json", mc);

    if (run.summary.diverged || mc.diverged_trials > 0) {
      std::string msg = std::to_string(mc.diverged_trials) + " of " + std::to_string(trials) + " trials diverged";
      if (!run.estimator.divergence_message.empty()) msg += "; first trial: " + run.estimator.divergence_message;
      return fail(TF_ERR_DIVERGENCE, msg);
    }
    return TF_OK;
  });
}

void tf_estimate_options_init(tf_estimate_options* options) {
  if (options == nullptr) return;
  options->profile = "arena";
  options->lever_arm[0] = options->lever_arm[1] = options->lever_arm[2] = 0.0;
  options->chi_square_gate = 0;
}

tf_status tf_estimate_run(const char* log_path, const tf_placement* placement, const tf_estimate_options* options,
                          const char* estimates_out, const char* gating_out) {
  if (log_path == nullptr || placement == nullptr || options == nullptr) {
    return null_argument("log_path, placement and options");
  }
  if (estimates_out == nullptr || gating_out == nullptr) return null_argument("output paths");
  return guarded([&] {
    const auto& p = placement->value;
    const auto log = tdoa::io::load_log(log_path, static_cast<int>(p.size()));
    const tdoa::Vec3 lever(options->lever_arm[0], options->lever_arm[1], options->lever_arm[2]);
    if (!tdoa::is_finite(lever)) throw tdoa::invalid_argument("lever arm must be finite");
    auto cfg = tdoa::resolve_eskf(profile_name_or_throw(options->profile), tdoa::ImuParams{}, lever);
    if (options->chi_square_gate != 0) cfg.gate_mode = tdoa::GateMode::ChiSquare;

    const auto run = tdoa::run_estimator(log, p, cfg);
    tdoa::io::save_estimates(estimates_out, run.estimates);
    tdoa::io::save_gating(gating_out, run.gating);
    if (!run.initialized) return fail(TF_ERR_DIVERGENCE, "filter not initialized: " + run.divergence_message);
    if (run.diverged) return fail(TF_ERR_DIVERGENCE, run.divergence_message);
    return TF_OK;
  });
}

tf_status tf_eval_run(const char* estimates_path, const char* ground_truth_path, const tf_scenario* scenario,
                      const char* summary_out, const char* csv_out) {
  if (estimates_path == nullptr || summary_out == nullptr) return null_argument("estimates_path and summary_out");
  if (ground_truth_path == nullptr && scenario == nullptr) return null_argument("ground_truth_path or scenario");
  return guarded([&] {
    const auto est = tdoa::io::load_estimates(estimates_path);
    std::vector<tdoa::GroundTruthPoint> gt;
    std::optional<tdoa::Trajectory> trajectory;
    if (scenario != nullptr) trajectory = tdoa::gen_trajectory(scenario->value.trajectory, &scenario->value.env.boundary);
    if (ground_truth_path != nullptr) {
      gt = tdoa::ground_truth_points(tdoa::io::load_log(ground_truth_path));
    } else {
      const auto& s = scenario->value;
      const auto n = static_cast<long>(std::floor(trajectory->duration() * s.rates.gt + 1e-9));
      for (long k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) / s.rates.gt;
        const auto state = trajectory->at(t);
        gt.push_back({t, state.pose, state.velocity});
      }
    }
    if (gt.empty()) throw tdoa::invalid_argument("no ground-truth records found");

    const double warmup = scenario != nullptr ? scenario->value.warmup : tdoa::RmseOptions{}.warmup;
    auto summary = tdoa::rmse(est, gt, {warmup});
    if (scenario != nullptr) {
      const auto& s = scenario->value;
      summary.bound_rmse = tdoa::trajectory_bound(*trajectory, s);
      if (csv_out != nullptr) {
        const auto rows = tdoa::error_curve(est, gt, s.placement, s.env, s.tdoa, s.synth.lever_arm, warmup);
        tdoa::io::save_error_csv(csv_out, rows);
      }
    }
    tdoa::io::save_summary(summary_out, summary);
    return TF_OK;
  });
}

}  // extern "C"
