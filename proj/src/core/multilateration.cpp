#include "core/multilateration.hpp"

#include "core/errors.hpp"
#include "core/placement.hpp"

#include <Eigen/Eigenvalues>

namespace tdoa {

MultilaterationResult multilateration_ml(std::span<const TdoaObservation> observations,
                                         const AnchorPlacement& placement, const Vec3& init,
                                         const MultilaterationOptions& options) {
  if (observations.empty()) throw invalid_argument("multilateration needs observations");

  MultilaterationResult out;
  out.position = init;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Mat3 normal = Mat3::Zero();
    Vec3 rhs = Vec3::Zero();
    const Pose pose{out.position, UnitQuaternion::identity()};
    for (const auto& obs : observations) {
      const double w = 1.0 / (obs.sigma * obs.sigma);
      const Vec3 g = tdoa_jacobian(obs.pair, pose, Vec3::Zero(), placement).d_dp.transpose();
      const double r = obs.d - tdoa_predict(obs.pair, pose, Vec3::Zero(), placement);
      normal += w * g * g.transpose();
      rhs += w * g * r;
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(normal);
    const Vec3 lambda = eig.eigenvalues();
    if (!(lambda.minCoeff() > 0.0) || lambda.maxCoeff() / lambda.minCoeff() > kConditionCutoff) {
      throw degenerate_geometry("multilateration normal matrix is singular");
    }
    const Vec3 step = eig.eigenvectors() * (lambda.cwiseInverse().asDiagonal() *
                                            (eig.eigenvectors().transpose() * rhs));
    out.position += step;
    out.iterations = iter + 1;
    out.normal_matrix = normal;
    if (!step.allFinite()) break;
    if (step.norm() < options.step_tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace tdoa
