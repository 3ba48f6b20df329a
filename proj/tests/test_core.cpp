#include <doctest.h>

#include <random>

#include "wireharness/core.hpp"
#include "wireharness/errors.hpp"

using namespace wireharness;

TEST_SUITE("core") {

TEST_CASE("lift of the zero state is zero") {
  const LiftedState g = lift({0, 0, 0, 0}, {0});
  CHECK(g.size() == 20);
  CHECK(g.isZero(0.0));
}

TEST_CASE("lift of a unit x") {
  const LiftedState g = lift({1, 0, 0, 0}, {0});
  for (int k = 0; k < kLiftDim; ++k) {
    const double expected = (k == 0 || k == monomial_index(0, 0)) ? 1.0 : 0.0;
    CHECK(g[k] == expected);
  }
  CHECK(monomial_index(0, 0) == 5);
}

TEST_CASE("monomial layout is the row-major upper triangle") {
  // 5 + C(6, 2): every unordered pair with repetition, in order.
  CHECK(kLiftDim == kLiftBaseDim + 15);
  const char* names[] = {"x", "y", "theta", "f", "phi"};
  std::vector<std::string> got;
  for (const auto& [i, j] : monomial_pairs()) got.push_back(std::string(names[i]) + names[j]);
  const std::vector<std::string> expected = {"xx", "xy", "xtheta", "xf", "xphi", "yy", "ytheta", "yf",
                                             "yphi", "thetatheta", "thetaf", "thetaphi", "ff", "fphi", "phiphi"};
  CHECK(got == expected);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const auto [a, b] = monomial_pairs()[static_cast<std::size_t>(monomial_index(i, j) - 5)];
      CHECK(a == std::min(i, j));
      CHECK(b == std::max(i, j));
    }
}

TEST_CASE("lift monomials are products of their sources") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  for (int n = 0; n < 100; ++n) {
    const WireState s{u(rng), u(rng), u(rng) / 100.0, std::abs(u(rng)) / 20.0};
    const TwistAngle phi{u(rng) / 50.0};
    const LiftedState g = lift(s, phi);
    CHECK(g[0] == s.x);
    CHECK(g[1] == s.y);
    CHECK(g[2] == s.theta);
    CHECK(g[3] == s.f);
    CHECK(g[4] == phi.phi);
    for (std::size_t k = 0; k < monomial_pairs().size(); ++k) {
      const auto [i, j] = monomial_pairs()[k];
      CHECK(g[5 + static_cast<int>(k)] == g[i] * g[j]);
    }
  }
}

TEST_CASE("fix-point frame is a pure translation") {
  const FixPointFrame f{{10, 10}};
  CHECK(world_to_fixpoint(f, {10, 10}) == Pose2D{0, 0});
  CHECK(world_to_fixpoint(f, {60, 10}) == Pose2D{50, 0});
  CHECK(fixpoint_to_world(f, {0, 0}) == Pose2D{10, 10});
  CHECK(fixpoint_to_world({{0, 0}}, {3, 4}) == Pose2D{3, 4});

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int n = 0; n < 100; ++n) {
    const FixPointFrame fr{{u(rng), u(rng)}};
    const Pose2D p{u(rng), u(rng)};
    const Pose2D back = fixpoint_to_world(fr, world_to_fixpoint(fr, p));
    CHECK(back.x == doctest::Approx(p.x).epsilon(1e-15));
    CHECK(back.y == doctest::Approx(p.y).epsilon(1e-15));
  }
}

TEST_CASE("command bounds follow the velocity caps") {
  CHECK(kMaxTranslationStep == 50.0);
  CHECK(kMaxRotationStep == doctest::Approx(3.0 * kPi / 180.0));
  CHECK(ControlCommand{50, -50, kMaxRotationStep}.within_bounds());
  CHECK_FALSE(ControlCommand{50.001, 0, 0}.within_bounds());
  CHECK_FALSE(ControlCommand{0, 0, 0.06}.within_bounds());
  CHECK_FALSE(ControlCommand{std::nan(""), 0, 0}.within_bounds());
  const ControlCommand c = clamp_to_bounds({80, -90, -1});
  CHECK(c == ControlCommand{50, -50, -kMaxRotationStep});
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(wrap_angle(0.25) == 0.25);
}

TEST_CASE("trajectory validation") {
  Trajectory t;
  t.states = {{}, {}};
  t.twists = {{}, {}};
  t.controls = {{1, 0, 0}};
  CHECK_NOTHROW(t.validate());
  t.controls.push_back({});
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t.controls = {{60, 0, 0}};
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

}
