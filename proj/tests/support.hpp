#pragma once

#include "core/geometry.hpp"
#include "core/measurement.hpp"
#include "core/placement.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace tdoa::test {

// Corners of an axis-aligned cube in ring order around the bottom face, then
// the top face.
inline AnchorPlacement cube_placement(double side) {
  AnchorPlacement placement;
  const double s = side;
  placement.anchors = {{0, 0, 0}, {s, 0, 0}, {s, s, 0}, {0, s, 0},
                       {0, 0, s}, {s, 0, s}, {s, s, s}, {0, s, s}};
  placement.pairs = ring_pairs(8);
  return placement;
}

inline Environment open_box(const Vec3& min, const Vec3& max) {
  Environment env;
  env.name = "box";
  env.boundary = {min, max};
  return env;
}

inline TdoaParams los_params(double sigma = 0.1) {
  TdoaParams params;
  params.sigma = sigma;
  params.variance_oos = std::max(params.variance_oos, sigma * sigma);
  params.nlos_bias_per_meter = 0.0;
  return params;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do v = Vec3(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

inline UnitQuaternion random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return UnitQuaternion(n(rng), n(rng), n(rng), n(rng));
}

inline Vec3 rotation_vector(const UnitQuaternion& q) {
  const Eigen::AngleAxisd aa(q.eigen());
  return aa.axis() * aa.angle();
}

inline Vec3 uniform_in(std::mt19937_64& rng, const Vec3& lo, const Vec3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {lo.x() + u(rng) * (hi.x() - lo.x()), lo.y() + u(rng) * (hi.y() - lo.y()),
          lo.z() + u(rng) * (hi.z() - lo.z())};
}

// Fresh directory under the build tree, emptied on construction.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tdoa_forge_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tdoa::test
