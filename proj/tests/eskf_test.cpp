#include "core/errors.hpp"
#include "core/eskf.hpp"
#include "core/profiles.hpp"
#include "core/trajectory.hpp"
#include "support.hpp"

#include "doctest.h"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

using namespace tdoa;

namespace {

AnchorPlacement line_pair() {
  AnchorPlacement placement;
  placement.anchors = {{0, 0, 0}, {10, 0, 0}};
  placement.pairs = {{1, 2}};
  return placement;
}

EskfConfig quiet_config() {
  EskfConfig cfg;
  cfg.imu.sigma_a = cfg.imu.sigma_w = cfg.imu.sigma_ba = cfg.imu.sigma_bw = 0.0;
  return cfg;
}

Mat15 random_covariance(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat15 A;
  for (int r = 0; r < kErrorDim; ++r)
    for (int c = 0; c < kErrorDim; ++c) A(r, c) = 0.1 * n(rng);
  return A * A.transpose() + 1e-4 * Mat15::Identity();
}

NavState random_state(std::mt19937_64& rng) {
  NavState x;
  x.p = test::uniform_in(rng, Vec3::Constant(1), Vec3::Constant(9));
  x.v = test::uniform_in(rng, Vec3::Constant(-1), Vec3::Constant(1));
  x.q = test::random_quaternion(rng);
  x.b_a = test::uniform_in(rng, Vec3::Constant(-0.05), Vec3::Constant(0.05));
  x.b_w = test::uniform_in(rng, Vec3::Constant(-0.01), Vec3::Constant(0.01));
  return x;
}

bool same_state(const NavState& a, const NavState& b) {
  return a.p == b.p && a.v == b.v && a.q.w() == b.q.w() && a.q.x() == b.q.x() && a.q.y() == b.q.y() &&
         a.q.z() == b.q.z() && a.b_a == b.b_a && a.b_w == b.b_w && a.t == b.t;
}

}  // namespace

TEST_SUITE("eskf") {

TEST_CASE("static equilibrium") {
  const auto cfg = quiet_config();
  NavState x;
  x.p = {1, 2, 3};
  x.q = UnitQuaternion::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7);
  ErrorState err;
  const ImuInput imu{x.q.inverse().rotate(-cfg.imu.gravity), Vec3::Zero()};
  for (int k = 0; k < 1000; ++k) x = predict(x, err, imu, 0.005, cfg).nominal;
  CHECK((x.p - Vec3(1, 2, 3)).norm() < 1e-10);
  CHECK(x.v.norm() < 1e-10);
  CHECK(std::abs(x.q.w() - UnitQuaternion::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7).w()) < 1e-12);
}

TEST_CASE("zero process noise propagates covariance by the transition only") {
  std::mt19937_64 rng(41);
  const auto cfg = quiet_config();
  const NavState x = random_state(rng);
  ErrorState err;
  err.P = random_covariance(rng);
  const ImuInput imu{{0.3, -0.2, 9.7}, {0.05, -0.02, 0.1}};
  const auto out = predict(x, err, imu, 0.01, cfg);
  const Mat15 F = transition_matrix(x, imu, 0.01);
  const Mat15 expected = F * err.P * F.transpose();
  CHECK((out.error.P - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("free fall") {
  const auto cfg = quiet_config();
  NavState x;
  ErrorState err;
  for (int k = 0; k < 1000; ++k) x = predict(x, err, ImuInput{}, 1e-3, cfg).nominal;
  CHECK((x.v - Vec3(0, 0, -9.81)).norm() < 1e-3);
  CHECK(std::abs(x.p.z() + 4.905) < 1e-3);
  CHECK(x.t == doctest::Approx(1.0));
}

TEST_CASE("predict arguments") {
  const EskfConfig cfg;
  CHECK_THROWS_AS(predict(NavState{}, ErrorState{}, ImuInput{}, 0.0, cfg), Error);
  CHECK_THROWS_AS(predict(NavState{}, ErrorState{}, ImuInput{}, -1e-3, cfg), Error);
  const auto gap = predict(NavState{}, ErrorState{}, ImuInput{}, 0.2, cfg);
  CHECK(gap.gap_warning);
  CHECK(gap.error.P(kVel, kVel) > 1.0);
}

TEST_CASE("strapdown integration of noiseless IMU data follows the truth") {
  auto curve = std::make_shared<LissajousCurve>(Vec3(4, 4, 1.3), Vec3(2, 2, 0.3), Vec3(1, 2, 3),
                                                Vec3(std::numbers::pi / 4, std::numbers::pi / 2, std::numbers::pi / 2), 1.0);
  const Trajectory traj(curve, TimingProfile{1.0, 0.5, 2.0});
  const double rate = 1000.0;
  ImuParams silent;
  silent.sigma_a = silent.sigma_w = silent.sigma_ba = silent.sigma_bw = 0.0;
  const auto log = synth_imu(traj, silent, rate, 1);
  auto cfg = quiet_config();

  const auto start = traj.at(0.0);
  NavState x;
  x.p = start.pose.position;
  x.v = start.velocity;
  x.q = start.pose.orientation;
  ErrorState err;
  const std::size_t steps = 5000;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto& s = std::get<ImuSample>(log[k].payload);
    x = predict(x, err, ImuInput{s.acc, s.gyro}, 1.0 / rate, cfg).nominal;
  }
  const auto truth = traj.at(static_cast<double>(steps) / rate);
  CHECK((x.p - truth.pose.position).norm() < 5e-3);
  CHECK((x.v - truth.velocity).norm() < 5e-3);
  const double angle = 2 * std::acos(std::min(1.0, std::abs((x.q.inverse() * truth.pose.orientation).w())));
  CHECK(angle < 1e-3);
}

TEST_CASE("correction examples") {
  const auto placement = line_pair();
  EskfConfig cfg;
  NavState x;
  x.p = {2, 0, 0};
  ErrorState err;
  err.P = Mat15::Identity() * 0.01;

  SUBCASE("zero innovation") {
    const auto out = correct_tdoa(x, err, TdoaSample{{1, 2}, 6.0}, placement, cfg);
    CHECK(out.decision.accepted);
    CHECK(out.decision.innovation == 0.0);
    CHECK((out.nominal.p - x.p).norm() == 0.0);
  }

  SUBCASE("one metre outlier is rejected at the default gate") {
    ErrorState tight;
    tight.P = Mat15::Zero();
    tight.P(kPos, kPos) = 0.007;  // S = 4·0.007 + 0.01 = 0.038
    const auto out = correct_tdoa(x, tight, TdoaSample{{1, 2}, 7.0}, placement, cfg);
    CHECK(out.decision.innovation_var == doctest::Approx(0.038));
    CHECK(out.decision.normalized >= 5.0);
    CHECK(out.decision.normalized == doctest::Approx(std::abs(out.decision.innovation) / std::sqrt(out.decision.innovation_var)));
    CHECK_FALSE(out.decision.accepted);
    CHECK(same_state(out.nominal, x));
    CHECK(out.error.P == tight.P);
  }

  SUBCASE("scalar filter update") {
    const double p0 = 0.04, R = cfg.variance_scheduled, nu = 0.1;
    ErrorState single;
    single.P = Mat15::Zero();
    single.P(kPos, kPos) = p0;
    const auto out = correct_tdoa(x, single, TdoaSample{{1, 2}, 6.0 + nu}, placement, cfg);
    const double h = -2.0;
    const double S = h * p0 * h + R;
    const double K = p0 * h / S;
    REQUIRE(out.decision.accepted);
    CHECK(out.decision.innovation_var == doctest::Approx(S).epsilon(1e-12));
    CHECK(out.nominal.p.x() == doctest::Approx(2.0 + K * nu).epsilon(1e-12));
    CHECK(out.error.P(kPos, kPos) == doctest::Approx((1 - K * h) * p0).epsilon(1e-12));
    CHECK(out.error.dx.norm() == 0.0);
  }

  SUBCASE("out-of-sequence pairs use the inflated variance") {
    AnchorPlacement three = line_pair();
    three.anchors.push_back({5, 5, 0});
    three.pairs = {{1, 2}};
    ErrorState zero;
    zero.P = Mat15::Zero();
    const auto out = correct_tdoa(x, zero, TdoaSample{{1, 3}, 0.0}, three, cfg);
    CHECK(out.decision.innovation_var == doctest::Approx(cfg.variance_oos));
  }

  SUBCASE("tag on an anchor is skipped") {
    NavState on;
    on.p = Vec3::Zero();
    const auto out = correct_tdoa(on, err, TdoaSample{{1, 2}, 1.0}, placement, cfg);
    CHECK(out.decision.skipped);
    CHECK_FALSE(out.decision.accepted);
  }
}

TEST_CASE("gate monotonicity and rejection leaves the filter untouched") {
  std::mt19937_64 rng(42);
  const auto placement = test::cube_placement(10.0);
  std::uniform_real_distribution<double> spike(-2.0, 2.0);
  for (int k = 0; k < 500; ++k) {
    const NavState x = random_state(rng);
    ErrorState err;
    err.P = random_covariance(rng) * 0.01;
    const AnchorPair pair = placement.pairs[static_cast<std::size_t>(k) % 8];
    EskfConfig cfg;
    cfg.lever_arm = {0.1, -0.05, 0.2};
    const double d = tdoa_predict(pair, x.pose(), cfg.lever_arm, placement) + spike(rng);
    bool was_accepted = false;
    for (double gamma : {0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0}) {
      for (auto mode : {GateMode::Scalar, GateMode::ChiSquare}) {
        cfg.gate_gamma = gamma;
        cfg.gate_mode = mode;
        const auto out = correct_tdoa(x, err, TdoaSample{pair, d}, placement, cfg);
        if (mode == GateMode::Scalar) {
          REQUIRE(!(was_accepted && !out.decision.accepted));
          was_accepted = out.decision.accepted;
        }
        if (!out.decision.accepted) {
          REQUIRE(same_state(out.nominal, x));
          REQUIRE(out.error.P == err.P);
          REQUIRE(out.error.dx == err.dx);
        }
      }
    }
  }
}

TEST_CASE("measurement jacobian matches the injected-error difference") {
  std::mt19937_64 rng(43);
  const auto placement = test::cube_placement(10.0);
  const double h = 1e-6;
  for (int k = 0; k < 300; ++k) {
    const NavState x = random_state(rng);
    const Vec3 lever = test::uniform_in(rng, Vec3::Constant(-0.4), Vec3::Constant(0.4));
    const AnchorPair pair = placement.pairs[static_cast<std::size_t>(k) % 8];
    const auto H = tdoa_error_jacobian(pair, x, lever, placement);
    for (int c = 0; c < kErrorDim; ++c) {
      ErrorState plus, minus;
      plus.dx[c] = h;
      minus.dx[c] = -h;
      const auto xp = inject_and_reset(x, plus).nominal;
      const auto xm = inject_and_reset(x, minus).nominal;
      const double fd = (tdoa_predict(pair, xp.pose(), lever, placement) - tdoa_predict(pair, xm.pose(), lever, placement)) / (2 * h);
      REQUIRE(std::abs(fd - H[c]) <= 1e-4 * std::max(1.0, std::abs(H[c])));
    }
  }
}

TEST_CASE("injection examples") {
  NavState x;
  x.p = {1, 2, 3};
  x.q = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.3);
  ErrorState err;
  err.P = Mat15::Identity() * 0.5;

  const auto same = inject_and_reset(x, err);
  CHECK(same_state(same.nominal, x));
  CHECK(same.error.P == err.P);

  ErrorState dp = err;
  dp.dx[kPos] = 0.1;
  const auto shifted = inject_and_reset(x, dp);
  CHECK(shifted.nominal.p.x() == 1.1);
  CHECK(shifted.error.dx.norm() == 0.0);

  ErrorState dth = err;
  dth.dx[kAtt] = 0.02;
  const auto turned = inject_and_reset(x, dth).nominal.q;
  const auto expected = x.q * quat_from_small_angle({0.02, 0, 0});
  CHECK(std::abs(turned.w() - expected.w()) < 1e-15);
  CHECK(std::abs(turned.x() - expected.x()) < 1e-15);
  CHECK(std::abs(turned.y() - expected.y()) < 1e-15);
  CHECK(std::abs(turned.z() - expected.z()) < 1e-15);
  const auto first_order = x.q * UnitQuaternion(1.0, 0.01, 0.0, 0.0);
  CHECK(std::abs(turned.x() - first_order.x()) < 1e-6);

  ErrorState big = err;
  big.dx[kAtt + 2] = 0.6;
  CHECK_THROWS_AS(inject_and_reset(x, big), Error);
  try {
    inject_and_reset(x, big);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Divergence);
  }
}

TEST_CASE("initialization") {
  const EskfConfig cfg;
  SUBCASE("level") {
    const auto s = initialize(std::nullopt, std::nullopt, {0, 0, 9.81}, cfg);
    CHECK(std::abs(s.nominal.q.w() - 1.0) < 1e-15);
    CHECK(s.nominal.p.norm() == 0.0);
    CHECK(s.error.P.block<3, 3>(kPos, kPos).isApprox(Mat3::Identity() * 25.0));
    CHECK(s.error.P(kAtt + 2, kAtt + 2) == doctest::Approx(1.0));
  }
  SUBCASE("gravity along body x") {
    const auto s = initialize(Vec3(1, 2, 3), std::nullopt, {9.81, 0, 0}, cfg);
    const Vec3 body_x_world = s.nominal.q.rotate(Vec3::UnitX());
    CHECK((body_x_world - Vec3::UnitZ()).norm() < 1e-12);
    CHECK(s.nominal.p == Vec3(1, 2, 3));
    CHECK(s.error.P(kPos, kPos) == doctest::Approx(cfg.initial.fix_position));
  }
  SUBCASE("fix covariance is used as given") {
    const Mat3 C = Vec3(0.1, 0.2, 0.3).asDiagonal();
    const auto s = initialize(Vec3::Zero(), C, {0, 0, 9.81}, cfg);
    CHECK(s.error.P.block<3, 3>(kPos, kPos).isApprox(C));
  }
  SUBCASE("not static") {
    CHECK_THROWS_AS(initialize(std::nullopt, std::nullopt, {0, 0, 12.0}, cfg), Error);
    CHECK_THROWS_AS(initialize(std::nullopt, std::nullopt, {0, 0, 7.5}, cfg), Error);
  }
}

TEST_CASE("covariance stays symmetric and positive semidefinite") {
  std::mt19937_64 rng(44);
  const auto placement = test::cube_placement(10.0);
  EskfConfig cfg;
  NavState x;
  x.p = {5, 5, 1};
  ErrorState err = initialize(x.p, std::nullopt, {0, 0, 9.81}, cfg).error;
  x = initialize(x.p, std::nullopt, {0, 0, 9.81}, cfg).nominal;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 20000; ++k) {
    const ImuInput imu{Vec3(0.1 * n(rng), 0.1 * n(rng), 9.81 + 0.1 * n(rng)), Vec3(0.01 * n(rng), 0.01 * n(rng), 0.01 * n(rng))};
    auto pred = predict(x, err, imu, 0.005, cfg);
    x = pred.nominal;
    err = pred.error;
    REQUIRE((err.P - err.P.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    if (k % 4 == 0) {
      const AnchorPair pair = placement.pairs[static_cast<std::size_t>(k / 4) % 8];
      const double d = tdoa_predict(pair, Pose{{5, 5, 1}, {}}, Vec3::Zero(), placement) + 0.1 * n(rng);
      const auto out = correct_tdoa(x, err, TdoaSample{pair, d}, placement, cfg);
      x = out.nominal;
      err = out.error;
      REQUIRE((err.P - err.P.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    }
    if (k % 1000 == 0) {
      Eigen::SelfAdjointEigenSolver<Mat15> es(err.P);
      REQUIRE(es.eigenvalues().minCoeff() >= -1e-9);
    }
  }
  CHECK((x.p - Vec3(5, 5, 1)).norm() < 0.5);
}

TEST_CASE("config validation") {
  EskfConfig cfg;
  cfg.gate_gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = EskfConfig{};
  cfg.variance_scheduled = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_NOTHROW(EskfConfig{}.validate());
}

}  // TEST_SUITE

TEST_SUITE("eskf") {

TEST_CASE("profile presets") {
  const auto arena = make_profile(ProfileName::Arena);
  CHECK(arena.tdoa.sigma == 0.1);
  CHECK(arena.eskf.variance_scheduled == doctest::Approx(0.01));
  CHECK(arena.eskf.gate_gamma == 5.0);

  const auto stairs = make_profile(ProfileName::Staircase);
  CHECK(stairs.eskf.variance_scheduled == doctest::Approx(0.015));

  const auto multi = make_profile(ProfileName::Multiroom);
  CHECK(multi.eskf.gate_gamma == 10.0);
  CHECK(multi.eskf.variance_oos == doctest::Approx(0.025));

  CHECK(parse_profile("multiroom") == ProfileName::Multiroom);
  CHECK_FALSE(parse_profile("backyard").has_value());
  CHECK(to_string(ProfileName::Staircase) == "staircase");
}

}  // TEST_SUITE
