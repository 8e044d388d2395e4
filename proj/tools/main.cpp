#include "tdoa_forge/tdoa_forge.h"

#include "CLI11.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

namespace {

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};

using Environment = std::unique_ptr<tf_environment, Deleter<tf_environment, tf_environment_free>>;
using Placement = std::unique_ptr<tf_placement, Deleter<tf_placement, tf_placement_free>>;
using Targets = std::unique_ptr<tf_targets, Deleter<tf_targets, tf_targets_free>>;
using Scenario = std::unique_ptr<tf_scenario, Deleter<tf_scenario, tf_scenario_free>>;

int report(tf_status status) {
  if (status != TF_OK) std::fprintf(stderr, "tdoa-forge: %s\n", tf_last_error());
  // Codes outside the documented exit set collapse to input errors.
  return status <= TF_ERR_DIVERGENCE ? static_cast<int>(status) : 1;
}

template <class Handle, class Loader>
bool load(Loader loader, const std::string& path, Handle& out, int& code) {
  typename Handle::pointer raw = nullptr;
  const tf_status status = loader(path.c_str(), &raw);
  out.reset(raw);
  if (status != TF_OK) code = report(status);
  return status == TF_OK;
}

struct OptimizeArgs {
  std::string env, targets, out_placement = "placement.json", out_report = "report.json";
  std::string pairing = "ring", profile = "arena";
  double rmse_target = 0.2, resolution = 0.5;
  int min_anchors = 4, max_anchors = 16;
  std::uint64_t seed = 0;
};

int run_optimize(const OptimizeArgs& a) {
  int code = 0;
  Environment env;
  Targets targets;
  if (!load(tf_environment_load, a.env, env, code)) return code;
  if (!load(tf_targets_load, a.targets, targets, code)) return code;

  tf_optimize_options opt;
  tf_optimize_options_init(&opt);
  opt.rmse_target = a.rmse_target;
  opt.min_anchors = a.min_anchors;
  opt.max_anchors = a.max_anchors;
  opt.pairing = a.pairing == "disjoint" ? TF_PAIRING_DISJOINT : TF_PAIRING_RING;
  opt.resolution = a.resolution;
  opt.seed = a.seed;
  opt.profile = a.profile.c_str();

  double aggregate = 0.0;
  int anchors = 0;
  const tf_status status = tf_placement_optimize(env.get(), targets.get(), &opt, a.out_placement.c_str(),
                                                 a.out_report.c_str(), &aggregate, &anchors);
  if (status == TF_OK || status == TF_ERR_TARGET_NOT_MET) {
    std::printf("anchors %d aggregate_rmse %.6g m target %.6g m %s\n", anchors, aggregate, a.rmse_target,
                status == TF_OK ? "met" : "not met");
  }
  return report(status);
}

struct HeatmapArgs {
  std::string env, placement, out = "heatmap.csv", profile = "arena";
  double height = 1.5, resolution = 0.25;
};

int run_heatmap(const HeatmapArgs& a) {
  int code = 0;
  Environment env;
  Placement placement;
  if (!load(tf_environment_load, a.env, env, code)) return code;
  if (!load(tf_placement_load, a.placement, placement, code)) return code;
  return report(tf_heatmap_write(env.get(), placement.get(), a.height, a.resolution, a.profile.c_str(), a.out.c_str()));
}

struct SimArgs {
  std::string scenario, out = "sim_out";
  int trials = 1;
};

int run_sim(const SimArgs& a) {
  int code = 0;
  Scenario scenario;
  if (!load(tf_scenario_load, a.scenario, scenario, code)) return code;
  return report(tf_sim_run(scenario.get(), a.trials, a.out.c_str()));
}

struct EstimateArgs {
  std::string log, placement, out = "estimate_out", profile = "arena";
  std::array<double, 3> lever_arm{0.0, 0.0, 0.0};
  bool chi_square = false;
};

int run_estimate(const EstimateArgs& a) {
  int code = 0;
  Placement placement;
  if (!load(tf_placement_load, a.placement, placement, code)) return code;
  tf_estimate_options opt;
  tf_estimate_options_init(&opt);
  opt.profile = a.profile.c_str();
  for (int k = 0; k < 3; ++k) opt.lever_arm[k] = a.lever_arm[static_cast<std::size_t>(k)];
  opt.chi_square_gate = a.chi_square ? 1 : 0;

  std::error_code ec;
  std::filesystem::create_directories(a.out, ec);
  const auto est = (std::filesystem::path(a.out) / "estimates.jsonl").string();
  const auto gating = (std::filesystem::path(a.out) / "gating.json").string();
  return report(tf_estimate_run(a.log.c_str(), placement.get(), &opt, est.c_str(), gating.c_str()));
}

struct EvalArgs {
  std::string est, gt, scenario, out = "summary.json", csv;
  bool bound = false;
};

int run_eval(const EvalArgs& a) {
  int code = 0;
  Scenario scenario;
  if (!a.scenario.empty() && !load(tf_scenario_load, a.scenario, scenario, code)) return code;
  if (a.gt.empty() && !scenario) {
    std::fprintf(stderr, "tdoa-forge: eval needs --gt or --scenario\n");
    return 1;
  }
  if (a.bound && !scenario) {
    std::fprintf(stderr, "tdoa-forge: --bound needs --scenario for the placement and environment\n");
    return 1;
  }
  std::string csv = a.csv;
  if (a.bound && csv.empty()) csv = (std::filesystem::path(a.out).parent_path() / "errors.csv").string();
  return report(tf_eval_run(a.est.c_str(), a.gt.empty() ? nullptr : a.gt.c_str(), scenario.get(), a.out.c_str(),
                            a.bound ? csv.c_str() : nullptr));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UWB TDOA anchor placement, simulation and error-state filtering"};
  app.footer(
      "Exit codes: 0 success, 1 input error, 2 target not met, 3 divergence.\n"
      "TDOA_FORGE_THREADS caps internal parallelism (0 or unset = all cores).");
  app.require_subcommand(1);
  app.set_version_flag("--version", tf_version());

  auto check_profile = [](const std::string& name) {
    return tf_profile_valid(name.c_str()) ? std::string() : "unknown profile " + name;
  };
  const CLI::Validator profile(check_profile, "arena|staircase|multiroom", "profile");

  OptimizeArgs opt;
  auto* po = app.add_subcommand("placement-optimize", "Choose anchor count and positions for a target bound");
  po->add_option("--env", opt.env, "Environment JSON")->required()->check(CLI::ExistingFile);
  po->add_option("--targets", opt.targets, "Target point set JSON")->required()->check(CLI::ExistingFile);
  po->add_option("--out-placement", opt.out_placement, "Placement JSON to write")->capture_default_str();
  po->add_option("--out-report", opt.out_report, "Report JSON to write")->capture_default_str();
  po->add_option("--rmse-target", opt.rmse_target, "Aggregate RMSE bound to reach (m)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  po->add_option("--min-anchors", opt.min_anchors, "First anchor count tried")->capture_default_str();
  po->add_option("--max-anchors", opt.max_anchors, "Last anchor count tried")->capture_default_str();
  po->add_option("--pairing", opt.pairing, "Pair schedule")
      ->capture_default_str()
      ->check(CLI::IsMember({"ring", "disjoint"}));
  po->add_option("--resolution", opt.resolution, "Candidate spacing on the boundary faces (m)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  po->add_option("--seed", opt.seed, "Index of the first spread-initialization candidate")->capture_default_str();
  po->add_option("--profile", opt.profile, "Radio profile")->capture_default_str()->check(profile);

  HeatmapArgs hm;
  auto* hc = app.add_subcommand("heatmap", "Evaluate the RMSE lower bound on a horizontal grid");
  hc->add_option("--env", hm.env, "Environment JSON")->required()->check(CLI::ExistingFile);
  hc->add_option("--placement", hm.placement, "Placement JSON")->required()->check(CLI::ExistingFile);
  hc->add_option("--height", hm.height, "Grid height (m)")->capture_default_str();
  hc->add_option("--resolution", hm.resolution, "Cell size (m)")->capture_default_str()->check(CLI::PositiveNumber);
  hc->add_option("--out", hm.out, "CSV to write")->capture_default_str();
  hc->add_option("--profile", hm.profile, "Radio profile")->capture_default_str()->check(profile);

  SimArgs sim;
  auto* sc = app.add_subcommand("sim", "Synthesize logs, run the filter and compare with the bound");
  sc->add_option("--scenario", sim.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sc->add_option("--out", sim.out, "Output directory")->capture_default_str();
  sc->add_option("--trials", sim.trials, "Monte-Carlo trials (seeds scenario.seed + k)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  EstimateArgs est;
  auto* ec = app.add_subcommand("estimate", "Replay a measurement log through the filter");
  ec->add_option("--log", est.log, "Measurement log JSONL")->required()->check(CLI::ExistingFile);
  ec->add_option("--placement", est.placement, "Placement JSON")->required()->check(CLI::ExistingFile);
  ec->add_option("--profile", est.profile, "Filter profile")->capture_default_str()->check(profile);
  ec->add_option("--lever-arm", est.lever_arm, "IMU to tag offset x,y,z (m)")->delimiter(',')->expected(3);
  ec->add_flag("--chi2", est.chi_square, "Gate on nu^2/S instead of |nu|/sqrt(S)");
  ec->add_option("--out", est.out, "Output directory for estimates.jsonl and gating.json")->capture_default_str();

  EvalArgs ev;
  auto* vc = app.add_subcommand("eval", "Position error of an estimate log against ground truth");
  vc->add_option("--est", ev.est, "Estimate log JSONL")->required()->check(CLI::ExistingFile);
  vc->add_option("--gt", ev.gt, "Measurement log holding gt records")->check(CLI::ExistingFile);
  vc->add_option("--scenario", ev.scenario, "Scenario JSON (ground truth and bound)")->check(CLI::ExistingFile);
  vc->add_flag("--bound", ev.bound, "Also write the t,err,bound CSV");
  vc->add_option("--csv", ev.csv, "CSV path for --bound (default errors.csv next to --out)");
  vc->add_option("--out", ev.out, "Summary JSON to write")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*po) return run_optimize(opt);
  if (*hc) return run_heatmap(hm);
  if (*sc) return run_sim(sim);
  if (*ec) return run_estimate(est);
  if (*vc) return run_eval(ev);
  return 1;
}
