#include "core/errors.hpp"
#include "core/multilateration.hpp"
#include "core/placement.hpp"
#include "support.hpp"

#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace tdoa;

namespace {

using Mat3L = Eigen::Matrix<long double, 3, 3>;
using Vec3L = Eigen::Matrix<long double, 3, 1>;

// Fisher information re-summed in extended precision from unit vectors.
Mat3L fim_oracle(const Vec3& p, const AnchorPlacement& placement, long double sigma) {
  Mat3L F = Mat3L::Zero();
  for (const auto& pair : placement.pairs) {
    const Vec3L pl = p.cast<long double>();
    const Vec3L ui = (pl - placement.anchor(pair.i).cast<long double>()).normalized();
    const Vec3L uj = (pl - placement.anchor(pair.j).cast<long double>()).normalized();
    const Vec3L g = uj - ui;
    F += g * g.transpose() / (sigma * sigma);
  }
  return F;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Environment cube_env() { return test::open_box({0, 0, 0}, {10, 10, 10}); }

// Floor-plan room with six wall-mounted candidates at mixed heights.
struct ToyRoom {
  Environment env = test::open_box({0, 0, 0}, {4, 3, 2.5});
  PlacementSearchSpace search;
  TargetSet targets;
  ToyRoom() {
    search.candidates = {{0, 0.5, 0.3}, {0, 2.5, 2.2}, {4, 0.4, 2.2}, {4, 2.6, 0.4}, {2, 0, 1.8}, {1.5, 3, 0.2}};
    search.min_pair_separation = 0.5;
    targets.points = {{1, 1, 1}, {3, 1, 1.2}, {2, 2, 0.8}, {1.2, 2.2, 1.5}};
  }
};

}  // namespace

TEST_SUITE("placement") {

TEST_CASE("single pair information has rank one") {
  AnchorPlacement placement;
  placement.anchors = {{-1, 0, 0}, {1, 0, 0}};
  placement.pairs = {{1, 2}};
  const auto env = test::open_box({-5, -5, -5}, {5, 5, 5});
  const Mat3 F = fim({0, 5, 0}, placement, env, test::los_params());
  Eigen::SelfAdjointEigenSolver<Mat3> es(F);
  CHECK(std::abs(es.eigenvalues()[0]) < 1e-9);
  CHECK(std::abs(es.eigenvalues()[1]) < 1e-9);
  CHECK(es.eigenvalues()[2] > 0.0);
  CHECK(std::abs(es.eigenvectors().col(2).x()) == doctest::Approx(1.0));

  const auto bound = mse_lower_bound({0.3, 2, 1}, placement, env, test::los_params());
  CHECK_FALSE(bound.observable);
  CHECK(std::isinf(bound.mse_lb));
}

TEST_CASE("cube information matches the extended-precision oracle") {
  const auto placement = test::cube_placement(10.0);
  const Mat3 F = fim({5, 5, 5}, placement, cube_env(), test::los_params(0.1));
  const Mat3L oracle = fim_oracle({5, 5, 5}, placement, 0.1L);
  CHECK((F - Mat3(oracle.cast<double>())).norm() < 1e-10 * Mat3(oracle.cast<double>()).norm());
  CHECK((F - F.transpose()).norm() <= 1e-12 * F.norm());
  Eigen::SelfAdjointEigenSolver<Mat3> es(F);
  CHECK(es.eigenvalues().minCoeff() > 0.0);

  const auto bound = mse_lower_bound({5, 5, 5}, placement, cube_env(), test::los_params(0.1));
  const Mat3L inv = oracle.inverse();
  CHECK(rel(bound.variance_term, static_cast<double>(inv.trace())) < 1e-10);
  CHECK(bound.bias_term == 0.0);
  CHECK(bound.mse_lb == bound.variance_term);
}

TEST_CASE("variance term scales with sigma squared") {
  const auto placement = test::cube_placement(10.0);
  const auto a = mse_lower_bound({3, 6, 2}, placement, cube_env(), test::los_params(0.1));
  const auto b = mse_lower_bound({3, 6, 2}, placement, cube_env(), test::los_params(0.2));
  CHECK(rel(b.variance_term, 4.0 * a.variance_term) < 1e-12);
}

TEST_CASE("bias term equals the propagated link bias") {
  const auto placement = test::cube_placement(10.0);
  Environment env = cube_env();
  env.obstacles.push_back(Box{{1, 1, 1}, {3, 3, 3}});
  TdoaParams params;
  params.nlos_bias_per_meter = 0.4;
  const Vec3 p(4, 4, 4);

  Mat3 F = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& pair : placement.pairs) {
    const Vec3 g = ((p - placement.anchor(pair.j)).normalized() - (p - placement.anchor(pair.i)).normalized());
    const double pen_i = penetration_length(p, placement.anchor(pair.i), env);
    const double pen_j = penetration_length(p, placement.anchor(pair.j), env);
    const double var = params.link_variance(pen_i > 0.0 || pen_j > 0.0);
    F += g * g.transpose() / var;
    b += g * (0.4 * (pen_j - pen_i)) / var;
  }
  const Vec3 delta = F.inverse() * b;
  const auto bound = mse_lower_bound(p, placement, env, params);
  REQUIRE(bound.bias_term > 0.0);
  CHECK(rel(bound.bias_term, delta.squaredNorm()) < 1e-9);
  CHECK(rel(bound.variance_term, F.inverse().trace()) < 1e-9);
  CHECK(bound.mse_lb == bound.variance_term + bound.bias_term);
}

TEST_CASE("information is symmetric positive semidefinite") {
  std::mt19937_64 rng(31);
  Environment env = test::open_box({-10, -10, -10}, {10, 10, 10});
  env.obstacles.push_back(Box{{-2, -2, -2}, {1, 1, 1}});
  for (int k = 0; k < 500; ++k) {
    AnchorPlacement placement;
    std::uniform_int_distribution<int> count(2, 10);
    const int m = count(rng);
    for (int a = 0; a < m; ++a) placement.anchors.push_back(test::uniform_in(rng, Vec3::Constant(-10), Vec3::Constant(10)));
    placement.pairs = ring_pairs(m);
    const Vec3 p = test::uniform_in(rng, Vec3::Constant(-9), Vec3::Constant(9));
    const Mat3 F = fim(p, placement, env, TdoaParams{});
    REQUIRE((F - F.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * F.norm());
    Eigen::SelfAdjointEigenSolver<Mat3> es(F);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("bound is invariant to anchor relabeling") {
  std::mt19937_64 rng(32);
  const auto base = test::cube_placement(10.0);
  Environment env = cube_env();
  env.obstacles.push_back(Box{{4, 1, 0}, {6, 3, 7}});
  const TdoaParams params;
  std::vector<int> perm(8);
  for (int k = 0; k < 200; ++k) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    AnchorPlacement relabeled = base;
    for (int a = 0; a < 8; ++a) relabeled.anchors[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])] = base.anchors[static_cast<std::size_t>(a)];
    for (auto& pair : relabeled.pairs) {
      pair.i = perm[static_cast<std::size_t>(pair.i - 1)] + 1;
      pair.j = perm[static_cast<std::size_t>(pair.j - 1)] + 1;
    }
    const Vec3 p = test::uniform_in(rng, Vec3::Constant(0.5), Vec3::Constant(9.5));
    const double a = mse_lower_bound(p, base, env, params).mse_lb;
    const double b = mse_lower_bound(p, relabeled, env, params).mse_lb;
    REQUIRE(rel(b, a) < 1e-12);
  }
}

TEST_CASE("bound is equivariant under rigid motion") {
  std::mt19937_64 rng(33);
  const auto base = test::cube_placement(10.0);
  Environment env = cube_env();
  env.obstacles.push_back(Box{{4, 1, 0}, {6, 3, 7}});
  const TdoaParams params;

  SUBCASE("quarter turns and translations keep obstacles axis aligned") {
    for (int k = 0; k < 100; ++k) {
      const double angle = std::numbers::pi / 2 * static_cast<double>(k % 4);
      const Mat3 R = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix().array().round().matrix();
      const Vec3 shift = test::uniform_in(rng, Vec3::Constant(-20), Vec3::Constant(20));
      auto move = [&](const Vec3& v) -> Vec3 { return R * v + shift; };
      AnchorPlacement moved = base;
      for (auto& a : moved.anchors) a = move(a);
      Environment menv;
      auto move_box = [&](const Box& b) {
        const Vec3 c0 = move(b.min), c1 = move(b.max);
        return Box{c0.cwiseMin(c1), c0.cwiseMax(c1)};
      };
      menv.boundary = move_box(env.boundary);
      for (const auto& o : env.obstacles) menv.obstacles.push_back(move_box(o));
      const Vec3 p = test::uniform_in(rng, Vec3::Constant(0.5), Vec3::Constant(9.5));
      const double a = mse_lower_bound(p, base, env, params).mse_lb;
      const double b = mse_lower_bound(move(p), moved, menv, params).mse_lb;
      REQUIRE(rel(b, a) < 1e-9);
    }
  }

  SUBCASE("arbitrary rotations without obstacles") {
    const auto open = cube_env();
    for (int k = 0; k < 200; ++k) {
      const Mat3 R = test::random_quaternion(rng).matrix();
      const Vec3 shift = test::uniform_in(rng, Vec3::Constant(-20), Vec3::Constant(20));
      AnchorPlacement moved = base;
      for (auto& a : moved.anchors) a = R * a + shift;
      const Vec3 p = test::uniform_in(rng, Vec3::Constant(0.5), Vec3::Constant(9.5));
      const double a = mse_lower_bound(p, base, open, params).mse_lb;
      const double b = mse_lower_bound(R * p + shift, moved, open, params).mse_lb;
      REQUIRE(rel(b, a) < 1e-9);
    }
  }
}

TEST_CASE("planar constellation is unobservable in its own plane") {
  AnchorPlacement placement;
  placement.anchors = {{0, 0, 2}, {8, 0, 2}, {8, 8, 2}, {0, 8, 2}, {4, 0, 2}, {8, 4, 2}};
  placement.pairs = ring_pairs(6);
  const auto env = test::open_box({0, 0, 0}, {8, 8, 4});
  const auto bound = mse_lower_bound({3, 5, 2}, placement, env, test::los_params());
  CHECK_FALSE(bound.observable);
  CHECK(std::isinf(bound.mse_lb));
  CHECK(std::isinf(placement_metric(TargetSet{{{3, 5, 2}, {4, 4, 1}}}, placement, env, test::los_params()).aggregate_rmse));
}

TEST_CASE("aggregate metric") {
  const auto placement = test::cube_placement(10.0);
  const auto params = test::los_params();
  const TargetSet one{{{2, 3, 4}}};
  const auto r1 = placement_metric(one, placement, cube_env(), params);
  CHECK(r1.aggregate_rmse == std::sqrt(mse_lower_bound({2, 3, 4}, placement, cube_env(), params).mse_lb));

  const TargetSet pts{{{2, 3, 4}, {7, 1, 5}, {5, 5, 5}}};
  TargetSet doubled = pts;
  doubled.points.insert(doubled.points.end(), pts.points.begin(), pts.points.end());
  CHECK(rel(placement_metric(doubled, placement, cube_env(), params).aggregate_rmse,
            placement_metric(pts, placement, cube_env(), params).aggregate_rmse) < 1e-15);
}

TEST_CASE("heatmap") {
  // Bottom ring, top ring and verticals: a schedule closed under the square's
  // symmetry group.
  auto placement = test::cube_placement(10.0);
  placement.pairs = {{1, 2}, {2, 3}, {3, 4}, {4, 1}, {5, 6}, {6, 7}, {7, 8}, {8, 5}, {1, 5}, {2, 6}, {3, 7}, {4, 8}};
  const auto params = test::los_params();
  const auto map = heatmap(cube_env(), placement, params, 3.0, 0.5);
  REQUIRE(map.nx == 20);
  REQUIRE(map.ny == 20);
  REQUIRE(map.cells.size() == 400);

  auto at = [&](int ix, int iy) { return map.cells[static_cast<std::size_t>(iy * map.nx + ix)].rmse_lb; };
  double worst = 0.0;
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const double v = at(ix, iy);
      // Square symmetry group of the cube footprint.
      worst = std::max({worst, rel(at(map.nx - 1 - ix, iy), v), rel(at(ix, map.ny - 1 - iy), v)});
      worst = std::max(worst, rel(at(iy, ix), v));
    }
  }
  CHECK(worst < 1e-9);

  double min_map = kInfinity, min_direct = kInfinity;
  for (const auto& cell : map.cells) {
    min_map = std::min(min_map, cell.rmse_lb);
    min_direct = std::min(min_direct, mse_lower_bound({cell.x, cell.y, 3.0}, placement, cube_env(), params).rmse());
  }
  CHECK(min_map == min_direct);
}

TEST_CASE("boundary candidate grid") {
  Environment env = test::open_box({0, 0, 0}, {4, 3, 2});
  env.obstacles.push_back(Box{{0, 0, 0}, {1, 1, 2}});
  const auto search = PlacementSearchSpace::boundary_grid(env, 0.5);
  REQUIRE_FALSE(search.candidates.empty());
  for (const auto& c : search.candidates) {
    REQUIRE(env.boundary.contains(c, 1e-12));
    const bool on_face = (c - env.boundary.min).cwiseAbs().minCoeff() < 1e-12 ||
                         (c - env.boundary.max).cwiseAbs().minCoeff() < 1e-12;
    REQUIRE(on_face);
    REQUIRE_FALSE(env.obstacles[0].contains(c, 1e-12));
  }
  // Any free floor point lies within half a lattice diagonal of a candidate.
  std::mt19937_64 rng(35);
  for (int k = 0; k < 200; ++k) {
    const Vec3 p = test::uniform_in(rng, {1.3, 1.3, 0}, {4, 3, 0});
    double nearest = kInfinity;
    for (const auto& c : search.candidates) nearest = std::min(nearest, (c - p).norm());
    REQUIRE(nearest <= 0.5 * std::sqrt(2.0) / 2 + 1e-12);
  }
}

TEST_CASE("bcm") {
  ToyRoom room;
  const auto params = test::los_params();
  AnchorPlacement init;
  init.anchors = spread_initialization(room.search, 4, 0);
  init.pairs = ring_pairs(4);

  SUBCASE("history is non-increasing and the result is a coordinate-wise minimum") {
    const auto result = bcm_optimize(room.targets, room.search, init, room.env, params, BcmConfig{20, 0.0});
    REQUIRE_FALSE(result.history.empty());
    CHECK(result.history.front() <= result.initial_metric);
    for (std::size_t k = 1; k < result.history.size(); ++k) CHECK(result.history[k] <= result.history[k - 1]);
    CHECK(result.report.aggregate_rmse == result.history.back());

    for (std::size_t a = 0; a < 4; ++a) {
      for (const auto& c : room.search.candidates) {
        AnchorPlacement trial = result.placement;
        bool clash = false;
        for (std::size_t o = 0; o < 4; ++o) clash |= o != a && (trial.anchors[o] - c).norm() < 0.5;
        if (clash) continue;
        trial.anchors[a] = c;
        REQUIRE(placement_metric(room.targets, trial, room.env, params).aggregate_rmse >= result.history.back());
      }
    }

    const auto again = bcm_optimize(room.targets, room.search, result.placement, room.env, params);
    CHECK(again.sweeps == 1);
    CHECK(again.placement.anchors == result.placement.anchors);
  }

  SUBCASE("empty candidate set") {
    PlacementSearchSpace empty;
    CHECK_THROWS_AS(bcm_optimize(room.targets, empty, init, room.env, params), Error);
  }

  SUBCASE("fixed anchors never move") {
    PlacementSearchSpace search = room.search;
    search.fixed_anchors = {2};
    const auto result = bcm_optimize(room.targets, search, init, room.env, params);
    CHECK(result.placement.anchors[1] == init.anchors[1]);
  }
}

TEST_CASE("escalation") {
  const auto env = cube_env();
  const TargetSet targets{{{5, 5, 5}, {2, 3, 4}, {8, 7, 2}, {6, 2, 8}, {3, 8, 6}}};
  const auto search = PlacementSearchSpace::boundary_grid(env, 2.5);
  const auto params = test::los_params();

  SUBCASE("generous target stops at the first count") {
    EscalationConfig cfg;
    cfg.rmse_target = 1.0;
    const auto result = escalate_anchor_count(targets, search, env, params, cfg);
    CHECK(result.success);
    CHECK(result.anchor_count == cfg.min_anchors);
    CHECK(result.report.aggregate_rmse <= cfg.rmse_target);
    CHECK(result.placement.pairs == ring_pairs(cfg.min_anchors));
  }

  SUBCASE("unreachable target reports the best attempt") {
    EscalationConfig cfg;
    cfg.rmse_target = 0.001;
    cfg.max_anchors = 8;
    cfg.pairing = Pairing::Disjoint;
    cfg.mode = TdoaMode::Decentralized;
    const auto result = escalate_anchor_count(targets, search, env, params, cfg);
    CHECK_FALSE(result.success);
    CHECK(result.steps.size() == 3);
    CHECK(std::isfinite(result.report.aggregate_rmse));
    CHECK(result.placement.pairs == disjoint_pairs(result.anchor_count));
    for (const auto& step : result.steps) CHECK(result.report.aggregate_rmse <= step.aggregate_rmse);
  }

  SUBCASE("success implies the target is met") {
    for (double target : {0.3, 0.15, 0.1}) {
      EscalationConfig cfg;
      cfg.rmse_target = target;
      cfg.max_anchors = 10;
      const auto result = escalate_anchor_count(targets, search, env, params, cfg);
      if (result.success) CHECK(result.report.aggregate_rmse <= target);
    }
  }
}

TEST_CASE("maximum-likelihood error respects the bound") {
  const auto placement = test::cube_placement(10.0);
  const auto env = cube_env();
  const double sigma = 0.1;
  const int trials = 3000;
  const Vec3 truth(4, 6, 3);
  std::mt19937_64 rng(34);
  std::normal_distribution<double> noise(0.0, sigma);
  double sq = 0.0;
  for (int k = 0; k < trials; ++k) {
    std::vector<TdoaObservation> obs;
    for (const auto& pair : placement.pairs) {
      obs.push_back({pair, tdoa_predict(pair, Pose{truth, {}}, Vec3::Zero(), placement) + noise(rng), sigma});
    }
    sq += (multilateration_ml(obs, placement, truth).position - truth).squaredNorm();
  }
  const double variance = mse_lower_bound(truth, placement, env, test::los_params(sigma)).variance_term;
  CHECK(sq / trials >= variance * (1.0 - 3.0 / std::sqrt(static_cast<double>(trials))));
}

}  // TEST_SUITE
