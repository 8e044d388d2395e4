#pragma once

#include "core/geometry.hpp"
#include "core/measurement.hpp"

#include <span>

namespace tdoa {

struct TdoaObservation {
  AnchorPair pair;
  double d = 0.0;
  double sigma = 0.1;
};

struct MultilaterationResult {
  Vec3 position = Vec3::Zero();
  int iterations = 0;
  bool converged = false;
  Mat3 normal_matrix = Mat3::Zero();  // Σ g gᵀ/σ² at the returned position
};

struct MultilaterationOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-9;  // m
};

/// Weighted Gauss-Newton maximum-likelihood position from TDOA observations.
/// Throws DegenerateGeometry when the normal matrix is singular.
MultilaterationResult multilateration_ml(std::span<const TdoaObservation> observations,
                                         const AnchorPlacement& placement, const Vec3& init,
                                         const MultilaterationOptions& options = {});

}  // namespace tdoa
