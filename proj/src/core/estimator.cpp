#include "core/estimator.hpp"

#include "core/errors.hpp"
#include "core/multilateration.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>

namespace tdoa {

namespace {

EstimateSample snapshot(const FilterState& fs) {
  EstimateSample s;
  s.t = fs.nominal.t;
  s.state = fs.nominal;
  s.P_diag = fs.error.P.diagonal();
  s.P_pos = fs.error.P.block<3, 3>(kPos, kPos);
  return s;
}

std::optional<MultilaterationResult> first_fix(const std::vector<TdoaSample>& buffer,
                                               const AnchorPlacement& placement, const EskfConfig& cfg) {
  if (buffer.size() < 3) return std::nullopt;
  std::vector<TdoaObservation> obs;
  obs.reserve(buffer.size());
  for (const auto& s : buffer) {
    const double var = placement.is_scheduled(s.pair) ? cfg.variance_scheduled : cfg.variance_oos;
    obs.push_back({s.pair, s.d, std::sqrt(var)});
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& a : placement.anchors) centroid += a;
  centroid /= static_cast<double>(placement.size());
  try {
    auto fix = multilateration_ml(obs, placement, centroid);
    if (!fix.converged || !fix.position.allFinite()) return std::nullopt;
    return fix;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateGeometry) throw;
    return std::nullopt;
  }
}

}  // namespace

long first_unsorted_record(const MeasurementLog& log) {
  for (std::size_t k = 1; k < log.size(); ++k) {
    if (log[k].t < log[k - 1].t) return static_cast<long>(k);
  }
  return -1;
}

EstimatorRun run_estimator(const MeasurementLog& log, const AnchorPlacement& placement, const EskfConfig& cfg,
                           const EstimatorOptions& options) {
  cfg.validate();
  placement.validate();
  if (const long bad = first_unsorted_record(log); bad >= 0) {
    throw invalid_argument("measurement log is not sorted by time at record " + std::to_string(bad + 1));
  }

  EstimatorRun run;
  std::map<std::pair<int, int>, PairStats> pair_stats;

  // Static alignment window.
  std::size_t k = 0;
  std::vector<TdoaSample> tdoa_buffer;
  Vec3 acc_sum = Vec3::Zero();
  long imu_count = 0;
  double t_first_imu = std::numeric_limits<double>::quiet_NaN();
  ImuInput last_imu;
  for (; k < log.size(); ++k) {
    const auto& rec = log[k];
    if (const auto* tdoa = std::get_if<TdoaSample>(&rec.payload)) {
      tdoa_buffer.push_back(*tdoa);
    } else if (const auto* imu = std::get_if<ImuSample>(&rec.payload)) {
      if (imu_count == 0) t_first_imu = rec.t;
      acc_sum += imu->acc;
      ++imu_count;
      last_imu = {imu->acc, imu->gyro};
      if (rec.t - t_first_imu >= options.init_window - 1e-9) break;
    }
  }
  if (k >= log.size()) return run;  // not enough IMU data to align

  FilterState fs;
  const Vec3 accel_mean = acc_sum / static_cast<double>(imu_count);
  try {
    if (auto fix = first_fix(tdoa_buffer, placement, cfg)) {
      const Mat3 cov = fix->normal_matrix.inverse();
      fs = initialize(fix->position, cov, accel_mean, cfg);
      run.used_fix = true;
    } else {
      fs = initialize(std::nullopt, std::nullopt, accel_mean, cfg);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InvalidArgument) throw;
    run.divergence_message = e.what();  // tag was not static during alignment
    return run;
  }
  fs.nominal.t = log[k].t;
  run.initialized = true;
  run.estimates.push_back(snapshot(fs));

  try {
    for (++k; k < log.size(); ++k) {
      const auto& rec = log[k];
      if (std::holds_alternative<GroundTruthSample>(rec.payload)) continue;
      const double dt = rec.t - fs.nominal.t;
      if (dt > 0.0) {
        auto pr = predict(fs.nominal, fs.error, last_imu, dt, cfg);
        if (pr.gap_warning) ++run.gating.gap_warnings;
        fs.nominal = pr.nominal;
        fs.nominal.t = rec.t;
        fs.error = pr.error;
      }
      if (const auto* imu = std::get_if<ImuSample>(&rec.payload)) {
        last_imu = {imu->acc, imu->gyro};
        run.estimates.push_back(snapshot(fs));
      } else if (const auto* tdoa = std::get_if<TdoaSample>(&rec.payload)) {
        auto cr = correct_tdoa(fs.nominal, fs.error, *tdoa, placement, cfg);
        fs.nominal = cr.nominal;
        fs.error = cr.error;
        run.decisions.push_back({k, rec.t, tdoa->pair, cr.decision});

        auto& st = pair_stats[{tdoa->pair.i, tdoa->pair.j}];
        st.pair = tdoa->pair;
        st.scheduled = placement.is_scheduled(tdoa->pair);
        if (cr.decision.skipped) {
          ++st.skipped;
          ++run.gating.skipped;
        } else if (cr.decision.accepted) {
          ++st.accepted;
          ++run.gating.accepted;
        } else {
          ++st.rejected;
          ++run.gating.rejected;
        }
      }
      if (!fs.nominal.p.allFinite() || !fs.nominal.v.allFinite()) {
        throw Error(ErrorKind::Divergence, "non-finite state at t=" + std::to_string(rec.t));
      }
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Divergence) throw;
    run.diverged = true;
    run.divergence_time = fs.nominal.t;
    run.divergence_message = e.what();
  }

  const long gated = run.gating.accepted + run.gating.rejected;
  run.gating.reject_rate = gated > 0 ? static_cast<double>(run.gating.rejected) / static_cast<double>(gated) : 0.0;
  for (auto& [key, st] : pair_stats) run.gating.per_pair.push_back(st);
  return run;
}

}  // namespace tdoa
