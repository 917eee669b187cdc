#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "artiprobe/error.hpp"
#include "artiprobe/forward.hpp"
#include "support.hpp"

using namespace artiprobe;

namespace {

DimensionNodes nodes(std::vector<double> t, std::vector<double> y) {
  DimensionNodes n;
  n.times = std::move(t);
  n.values = std::move(y);
  for (std::size_t i = 0; i < n.times.size(); ++i) n.intervals.push_back({n.times[i], n.times[i]});
  return n;
}

FeatureValue S(double v) { return FeatureValue::specified(v); }
FeatureValue U() { return FeatureValue::unknown(); }

// Dense solve of the natural-spline moment equations, independent of the
// Thomas-algorithm implementation.
std::vector<double> dense_moments(const std::vector<double>& t, const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  a(0, 0) = 1.0;
  a(n - 1, n - 1) = 1.0;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
    a(i, i - 1) = h0 / 6.0;
    a(i, i) = (h0 + h1) / 3.0;
    a(i, i + 1) = h1 / 6.0;
    rhs(i) = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
  }
  const Eigen::VectorXd m = a.fullPivLu().solve(rhs);
  return {m.data(), m.data() + n};
}

}  // namespace

TEST_CASE("method names parse") {
  CHECK(parse_interp_method("linear") == InterpMethod::Linear);
  CHECK(parse_interp_method("cubic_hermite") == InterpMethod::CubicHermite);
  CHECK(parse_interp_method("natural_cubic") == InterpMethod::NaturalCubic);
  CHECK(parse_interp_method("piecewise_constant") == InterpMethod::PiecewiseConstant);
  CHECK_THROWS_AS(parse_interp_method("quintic"), ValidationError);
  for (auto m : {InterpMethod::PiecewiseConstant, InterpMethod::Linear, InterpMethod::CubicHermite,
                 InterpMethod::NaturalCubic}) {
    CHECK(parse_interp_method(to_string(m)) == m);
  }
}

TEST_CASE("select_nodes drops Unknown entries per dimension and keeps boundaries") {
  const auto f = make_featural("u", {{S(1), S(1)}, {S(-1), U()}, {S(1), U()}}, {{0, .1}, {.1, .2}, {.2, .3}});
  const auto n = select_nodes(f);
  REQUIRE(n.size() == 2);
  CHECK(n[0].size() == 5);
  CHECK(n[1].size() == 3);
  CHECK(n[1].times.front() == 0.0);
  CHECK(n[1].times.back() == f.end_time());
  CHECK(n[1].values == std::vector<double>{0.0, 1.0, 0.0});

  const auto g = make_featural("u", {{S(1)}, {S(-1)}, {U()}}, {{0, .1}, {.1, .2}, {.2, .3}});
  CHECK(select_nodes(g)[0].size() == 4);  // K+1

  const auto h = make_featural("u", {{U()}, {U()}}, {{0, .1}, {.1, .2}});
  const auto hn = select_nodes(h);
  CHECK(hn[0].size() == 2);
  const auto traj = synthesize(h, InterpMethod::NaturalCubic);
  CHECK(traj.frames.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interpolation examples") {
  const auto two = nodes({0, 1}, {0, 1});
  CHECK(interpolate(two, InterpMethod::Linear, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(interpolate(two, InterpMethod::CubicHermite, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(interpolate(two, InterpMethod::CubicHermite, 0.25) == doctest::Approx(0.15625).epsilon(1e-15));
  const auto three = nodes({0, 1, 2}, {0, 1, 0});
  CHECK(interpolate(three, InterpMethod::NaturalCubic, 0.5) == doctest::Approx(0.6875).epsilon(1e-14));
  const Interpolant nat(three, InterpMethod::NaturalCubic);
  CHECK(nat.moments()[1] == doctest::Approx(-3.0).epsilon(1e-14));
}

TEST_CASE("constant nodes give constant curves with zero curvature") {
  const auto c = nodes({0, 0.3, 0.7, 1.2}, {2.5, 2.5, 2.5, 2.5});
  for (auto m : {InterpMethod::Linear, InterpMethod::CubicHermite, InterpMethod::NaturalCubic}) {
    for (double tau = 0.0; tau <= 1.2; tau += 0.01) {
      CHECK(interpolate(c, m, tau) == doctest::Approx(2.5).epsilon(1e-14));
      if (is_cubic(m)) CHECK(std::abs(second_derivative(c, m, tau)) < 1e-12);
    }
  }
}

TEST_CASE("two nodes: natural cubic is the straight line, Hermite hits the mean at the midpoint") {
  const auto two = nodes({0.2, 1.0}, {-1.0, 3.0});
  for (double tau = 0.2; tau <= 1.0; tau += 0.05) {
    CHECK(interpolate(two, InterpMethod::NaturalCubic, tau) ==
          doctest::Approx(interpolate(two, InterpMethod::Linear, tau)).epsilon(1e-13));
  }
  CHECK(interpolate(two, InterpMethod::CubicHermite, 0.6) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(interpolate(two, InterpMethod::CubicHermite, 0.4) != doctest::Approx(interpolate(two, InterpMethod::Linear, 0.4)));
}

TEST_CASE("second derivatives") {
  const auto two = nodes({0, 1}, {0, 1});
  for (double tau = 0.0; tau <= 1.0; tau += 0.125) {
    CHECK(second_derivative(two, InterpMethod::CubicHermite, tau) == doctest::Approx(6.0 - 12.0 * tau).epsilon(1e-13));
  }
  const auto three = nodes({0, 0.4, 1.1, 1.5}, {0, 1, -2, 0});
  CHECK(std::abs(second_derivative(three, InterpMethod::NaturalCubic, 0.0)) < 1e-12);
  CHECK(std::abs(second_derivative(three, InterpMethod::NaturalCubic, 1.5)) < 1e-12);
  CHECK_THROWS_AS(second_derivative(three, InterpMethod::Linear, 0.5), std::logic_error);
  CHECK_THROWS_AS(second_derivative(three, InterpMethod::PiecewiseConstant, 0.5), std::logic_error);
}

TEST_CASE("evaluation outside the node range is rejected") {
  const auto two = nodes({0, 1}, {0, 1});
  CHECK_THROWS_AS(interpolate(two, InterpMethod::Linear, -0.01), std::out_of_range);
  CHECK_THROWS_AS(interpolate(two, InterpMethod::NaturalCubic, 1.01), std::out_of_range);
}

TEST_CASE("natural spline moments agree with a dense solve") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> gap(0.01, 0.5);
  std::normal_distribution<double> val(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> count(2, 40);
    const int n = count(rng);
    std::vector<double> t{0.0}, y{val(rng)};
    for (int i = 1; i < n; ++i) {
      t.push_back(t.back() + gap(rng));
      y.push_back(val(rng));
    }
    const auto m = natural_spline_moments(t, y);
    const auto ref = dense_moments(t, y);
    REQUIRE(m.size() == ref.size());
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i] == doctest::Approx(ref[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("natural cubic is C2 across knots") {
  std::mt19937_64 rng(11);
  const auto f = testing::random_real_featural(rng, 12, 3, 0.2);
  for (const auto& n : select_nodes(f)) {
    const Interpolant g(n, InterpMethod::NaturalCubic);
    const auto value = [&](double t) { return g.value(t); };
    for (std::size_t k = 1; k + 1 < n.size(); ++k) {
      const double t = n.times[k];
      const auto left = testing::one_sided_limits(value, t, -1.0, 2e-3);
      const auto right = testing::one_sided_limits(value, t, 1.0, 2e-3);
      CHECK(std::abs(left.value - right.value) < 1e-6);
      CHECK(std::abs(left.velocity - right.velocity) < 1e-6);
      CHECK(std::abs(left.acceleration - right.acceleration) < 1e-6);
      CHECK(left.acceleration == doctest::Approx(g.second_derivative(t)).epsilon(1e-6).scale(1.0));
    }
    CHECK(std::abs(g.second_derivative(n.times.front())) < 1e-9);
    CHECK(std::abs(g.second_derivative(n.times.back())) < 1e-9);
  }
}

TEST_CASE("Hermite has zero velocity at every node") {
  std::mt19937_64 rng(12);
  const auto f = testing::random_real_featural(rng, 15, 4, 0.3);
  for (const auto& n : select_nodes(f)) {
    const Interpolant g(n, InterpMethod::CubicHermite);
    const auto value = [&](double t) { return g.value(t); };
    for (std::size_t k = 1; k + 1 < n.size(); ++k) {
      const double t = n.times[k];
      const double h = 1e-5;
      CHECK(std::abs(testing::central_velocity(value, t, h)) < 1e-6);
      CHECK(g.first_derivative(t) == 0.0);
      // The plain two-point stencil is off by its curvature-jump truncation term.
      const double plain = (g.value(t + h) - g.value(t - h)) / (2 * h);
      // g'' is linear on each side: two samples give its limit and slope.
      const double s = 1e-3;
      const double ar1 = g.second_derivative(t + s), ar2 = g.second_derivative(t + 2 * s);
      const double al1 = g.second_derivative(t - s), al2 = g.second_derivative(t - 2 * s);
      const double jump = (2 * ar1 - ar2) - (2 * al1 - al2);
      const double jerk = (ar2 - ar1) / s + (al1 - al2) / s;
      CHECK(std::abs(plain - (jump * h / 4 + jerk * h * h / 12)) < 1e-6);
    }
  }
}

TEST_CASE("piecewise constant holds each phone value over its interval") {
  const auto f = make_featural("u", {{S(1)}, {S(-1)}, {S(0.5)}}, {{0, 0.1}, {0.1, 0.25}, {0.25, 0.4}});
  const auto n = select_nodes(f)[0];
  CHECK(interpolate(n, InterpMethod::PiecewiseConstant, 0.0) == 1.0);
  CHECK(interpolate(n, InterpMethod::PiecewiseConstant, 0.0999) == 1.0);
  CHECK(interpolate(n, InterpMethod::PiecewiseConstant, 0.1) == -1.0);
  CHECK(interpolate(n, InterpMethod::PiecewiseConstant, 0.3) == 0.5);
  CHECK(interpolate(n, InterpMethod::PiecewiseConstant, 0.4) == 0.5);
  const auto traj = synthesize(f, InterpMethod::PiecewiseConstant);
  REQUIRE(traj.frame_count() == 40);
  CHECK(traj.frames(9, 0) == -1.0);   // tau = 0.10
  CHECK(traj.frames(24, 0) == 0.5);   // tau = 0.25
}

TEST_CASE("synthesize: frame count, sampling grid and errors") {
  const auto one = make_featural("u", {{S(1), S(-1)}}, {{0.0, 0.4}});
  const auto traj = synthesize(one, InterpMethod::Linear, 100.0);
  CHECK(traj.frame_count() == 40);
  CHECK(traj.dimension() == 2);
  CHECK(frame_count(0.4, 100.0) == 40);
  CHECK(frame_count(0.7, 100.0) == 70);
  CHECK(frame_count(0.709, 100.0) == 70);
  // Frame k (1-based) is at k/100: frame 20 is the target at tau = 0.2.
  CHECK(traj.frames(19, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(traj.frames(19, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(traj.frames(39, 0) == doctest::Approx(0.0).epsilon(1e-12));

  const auto unk = make_featural("u", {{S(1), U()}}, {{0.0, 0.4}});
  CHECK_THROWS_AS(synthesize(unk, InterpMethod::PiecewiseConstant), ValidationError);
  CHECK_NOTHROW(synthesize(unk, InterpMethod::Linear));
  FeaturalSegmentation empty;
  CHECK_THROWS_AS(synthesize(empty, InterpMethod::Linear), ValidationError);
}

TEST_CASE("linear synthesis reproduces targets at target frames") {
  // Targets placed on the frame grid so quantization is exact.
  const auto f = make_featural("u", {{S(1)}, {S(-1)}, {S(1)}}, {{0.0, 0.2}, {0.2, 0.4}, {0.4, 0.6}});
  const auto traj = synthesize(f, InterpMethod::Linear);
  CHECK(traj.frames(9, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(traj.frames(29, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(traj.frames(49, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interpolants pass through their nodes on random segmentations") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<std::size_t> k(1, 40), d(1, 20);
    const auto f = testing::random_real_featural(rng, k(rng), d(rng), 0.3);
    for (const auto m : {InterpMethod::Linear, InterpMethod::CubicHermite, InterpMethod::NaturalCubic}) {
      for (const auto& n : select_nodes(f)) {
        const Interpolant g(n, m);
        for (std::size_t i = 0; i < n.size(); ++i) CHECK(std::abs(g.value(n.times[i]) - n.values[i]) < 1e-9);
      }
      CHECK(synthesize(f, m).frames.allFinite());
    }
  }
}
