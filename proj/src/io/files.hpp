#pragma once

#include "core/estimator.hpp"
#include "core/measurement.hpp"
#include "core/placement.hpp"
#include "core/sim.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tdoa::io {

namespace fs = std::filesystem;

// Loaders validate every field and throw InputError naming file, line and
// JSON pointer. Writers throw Error(Io) when the file cannot be created.

Environment load_environment(const fs::path& path);
AnchorPlacement load_placement(const fs::path& path);
TargetSet load_targets(const fs::path& path);
// Environment and placement paths inside the scenario resolve relative to
// the scenario file.
Scenario load_scenario(const fs::path& path);
// Anchor indices are checked against `anchor_count` when it is positive.
MeasurementLog load_log(const fs::path& path, int anchor_count = 0);
std::vector<EstimateSample> load_estimates(const fs::path& path);
Heatmap load_heatmap_csv(const fs::path& path);

void save_environment(const fs::path& path, const Environment& env);
void save_placement(const fs::path& path, const AnchorPlacement& placement);
void save_targets(const fs::path& path, const TargetSet& targets);
void save_log(const fs::path& path, const MeasurementLog& log);
void save_estimates(const fs::path& path, std::span<const EstimateSample> estimates);
void save_gating(const fs::path& path, const GatingReport& gating);

struct ReportExtras {
  int sweeps = 0;
  std::vector<double> history;
  bool has_target = false;
  double rmse_target = 0.0;
  bool success = true;
  int anchor_count = 0;
  std::vector<EscalationStep> steps;
};

void save_report(const fs::path& path, const MetricReport& report, const ReportExtras& extras);
void save_heatmap_csv(const fs::path& path, const Heatmap& map);
void save_error_csv(const fs::path& path, std::span<const ErrorCurveRow> rows);
void save_summary(const fs::path& path, const EvalSummary& summary);
void save_monte_carlo(const fs::path& path, const MonteCarloSummary& summary);

// %.17g, with "inf"/"-inf"/"nan" spelled out.
std::string format_number(double value);

}  // namespace tdoa::io
