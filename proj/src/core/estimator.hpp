#pragma once

#include "core/eskf.hpp"
#include "core/measurement.hpp"

#include <limits>
#include <string>
#include <vector>

namespace tdoa {

struct EstimateSample {
  double t = 0.0;
  NavState state;
  Vec15 P_diag = Vec15::Zero();
  Mat3 P_pos = Mat3::Zero();
};

struct PairStats {
  AnchorPair pair;
  bool scheduled = false;
  long accepted = 0;
  long rejected = 0;
  long skipped = 0;
};

struct GatingReport {
  long accepted = 0;
  long rejected = 0;
  long skipped = 0;
  double reject_rate = 0.0;  // rejected / (accepted + rejected)
  long gap_warnings = 0;
  std::vector<PairStats> per_pair;  // sorted by (i, j)
};

struct TdoaDecision {
  std::size_t record_index = 0;
  double t = 0.0;
  AnchorPair pair;
  GateDecision decision;
};

struct EstimatorOptions {
  double init_window = 0.5;  // s of static IMU data averaged for alignment
};

struct EstimatorRun {
  std::vector<EstimateSample> estimates;
  std::vector<TdoaDecision> decisions;
  GatingReport gating;
  bool initialized = false;
  bool used_fix = false;
  bool diverged = false;
  double divergence_time = std::numeric_limits<double>::quiet_NaN();
  std::string divergence_message;
};

/// Index of the first record whose timestamp decreases, or -1.
long first_unsorted_record(const MeasurementLog& log);

/// Replays a time-sorted log through the filter: static alignment over the
/// first `init_window` seconds, a multilateration fix from the TDOA buffered
/// in that window, then IMU-rate prediction with TDOA corrections applied at
/// their own timestamps. Ground-truth records are ignored.
EstimatorRun run_estimator(const MeasurementLog& log, const AnchorPlacement& placement, const EskfConfig& cfg,
                           const EstimatorOptions& options = {});

}  // namespace tdoa
