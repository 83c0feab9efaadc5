#include <doctest.h>

#include <cmath>
#include <random>

#include "tvflow/ball_dynamics.hpp"
#include "tvflow/calibration.hpp"
#include "tvflow/errors.hpp"
#include "tvflow/oracle.hpp"

using namespace tvflow;
namespace o = tvflow::oracle;

TEST_CASE("symbolic calculus") {
  const o::Expr rlogr{{1.0, 1.0, 1}};
  const o::Expr d = o::differentiate(rlogr);
  CHECK(o::evaluate(d, std::exp(1.0)) == doctest::Approx(2.0));
  CHECK(o::evaluate(o::differentiate(o::Expr{{3.0, 4.0, 0}}), 2.0) == doctest::Approx(96.0));
  CHECK(o::simplify(o::add(o::Expr{{1.0, 2.0, 0}}, o::Expr{{-1.0, 2.0, 0}})).empty());
  for (int n = 1; n <= 7; ++n) {
    for (int i = 1; i < 4; ++i) CHECK(o::simplify(o::apply_operator(n, o::basis_function(n, i))).empty());
    CHECK(o::lambda_of(n, {1.0, 0.3, -0.2, 0.7}) == doctest::Approx(-2.0 * n * (n + 2)));
  }
}

TEST_CASE("bvp solve reproduces printed reductions") {
  const auto s = o::bvp_solve(1, 1.0, 3.0, {-1.0, 0.0, -1.0, 0.0});
  CHECK(std::abs(s.c[0]) < 1e-14);
  CHECK(std::abs(s.c[1]) < 1e-14);
  CHECK(std::abs(s.c[2]) < 1e-14);
  CHECK(s.c[3] == doctest::Approx(-1.0));
  CHECK(std::abs(s.lambda) < 1e-13);
}

TEST_CASE("regular solve is the ball calibration") {
  const auto s = o::regular_solve(3, 1.0, -1.0, 0.0);
  const auto ball = solve_ball(Dimension(3), 1.0).profile.coefficients();
  for (int i = 0; i < 4; ++i) CHECK(s.c[i] == doctest::Approx(ball[i]).epsilon(1e-14));
  CHECK(s.lambda == doctest::Approx(-15.0));
}

TEST_CASE("cross-path equivalence with the calibration solver") {
  const auto s = o::bvp_solve(5, 1.0, 2.0, {1.0, 0.0, -1.0, 0.0});
  const auto mine = annulus_coefficients(Dimension(5), 1.0, 2.0, -1, -1);
  for (int i = 0; i < 4; ++i) CHECK(s.c[i] == doctest::Approx(mine[i]).epsilon(1e-10));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> q(1.05, 20.0);
  std::uniform_int_distribution<int> nd(1, 10);
  for (int i = 0; i < 100; ++i) {
    const int n = nd(rng);
    const double R0 = q(rng) / 4.0, R1 = R0 * q(rng);
    const auto a = o::bvp_solve(n, R0, R1, {1.0, 0.0, 1.0, 0.0}).c;
    const auto b = annulus_coefficients(Dimension(n), R0, R1, -1, 1);
    double scale = 0.0;
    for (double x : b) scale = std::max(scale, std::abs(x));
    for (int k = 0; k < 4; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-10 * scale);
  }
  CHECK_THROWS_AS(o::bvp_solve(3, 1.0, 1.0, {1.0, 0.0, -1.0, 0.0}), Error);
}

TEST_CASE("finite-difference residuals") {
  const Calibration ball = solve_ball(Dimension(3), 1.0);
  const auto g = o::sample(3, ball.profile.coefficients(), geometric_grid(0.05, 1.0, 10000));
  CHECK(o::fd_ode_residual(g, 3, ball.lambda) <= 1e-5);

  o::GridFunction c;
  c.r = geometric_grid(0.5, 2.0, 50);
  c.v.assign(50, 3.0);
  CHECK(o::fd_ode_residual(c, 1, 2.5) == doctest::Approx(2.5));

  o::GridFunction lin;
  lin.r = geometric_grid(0.5, 2.0, 50);
  for (double r : lin.r) lin.v.push_back(r);
  CHECK(o::fd_ode_residual(lin, 1, 0.0) < 1e-6);

  o::GridFunction coarse;
  coarse.r = {1.0, 2.0, 3.0};
  coarse.v = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(o::fd_ode_residual(coarse, 1, 0.0), Error);
}

TEST_CASE("finite-difference residual converges at second order") {
  const auto v = solve_annulus(Dimension(4), 1.0, 3.0, SignatureSpec::constant());
  auto res = [&](std::size_t count) {
    const auto g = o::sample(4, v.witness->profile.coefficients(), geometric_grid(1.0, 3.0, count));
    return o::fd_ode_residual(g, 4, v.witness->lambda);
  };
  CHECK(std::log2(res(81) / res(161)) >= 1.9);
  CHECK(std::log2(res(161) / res(321)) >= 1.9);
}

TEST_CASE("rk4 against the ball closed forms") {
  const o::VectorField ball3 = [](double, const o::State& y) {
    return o::State{-15.0 / std::pow(y[1], 3), 3.0 / (y[1] * y[1] * y[0])};
  };
  const auto tr = o::rk4(ball3, {1.0, 1.0}, 0.0, 0.1, 1e-5);
  const BallState b = evolve_ball(Dimension(3), 1.0, 1.0, 0.1);
  CHECK(tr.t.back() == 0.1);
  CHECK(std::abs(tr.y.back()[0] - b.a) < 1e-8);
  CHECK(std::abs(tr.y.back()[1] - b.R) < 1e-8);

  const o::VectorField ball2 = [](double t, const o::State& y) {
    const double R3 = y[1] * y[1] * y[1];
    return o::State{-8.0 / R3, 3.0 * y[1] / (y[0] * R3 - t)};
  };
  const auto tr2 = o::rk4(ball2, {1.0, 1.0}, 0.0, 1.0, 1e-5);
  const BallState b2 = evolve_ball(Dimension(2), 1.0, 1.0, 1.0);
  CHECK(std::abs(tr2.y.back()[0] - b2.a) < 1e-7);
  CHECK(std::abs(tr2.y.back()[1] - b2.R) < 1e-7);

  const o::VectorField zero = [](double, const o::State& y) { return o::State(y.size(), 0.0); };
  const auto flat = o::rk4(zero, {2.0, -1.0}, 0.0, 1.0, 0.1);
  CHECK(flat.y.back() == o::State{2.0, -1.0});

  const o::VectorField blow = [](double, const o::State& y) { return o::State{std::nan("") * y[0]}; };
  try {
    o::rk4(blow, {1.0}, 0.0, 1.0, 0.1);
    FAIL("NaN must be reported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Integration);
  }
  CHECK_THROWS_AS(o::rk4(zero, {1.0}, 0.0, 1.0, 0.0), Error);
}

TEST_CASE("rk4 is fourth order") {
  const o::VectorField ball3 = [](double, const o::State& y) {
    return o::State{-15.0 / std::pow(y[1], 3), 3.0 / (y[1] * y[1] * y[0])};
  };
  const BallState b = evolve_ball(Dimension(3), 1.0, 1.0, 0.1);
  auto err = [&](double dt) {
    const auto y = o::rk4(ball3, {1.0, 1.0}, 0.0, 0.1, dt).y.back();
    return std::max(std::abs(y[0] - b.a), std::abs(y[1] - b.R));
  };
  CHECK(std::log2(err(0.01) / err(0.005)) >= 3.9);
}

TEST_CASE("radial integrals") {
  CHECK(o::radial_integral([](double) { return 1.0; }, 3, 0.0, 1.0) == doctest::Approx(4.0 * M_PI / 3.0).epsilon(1e-10));
  for (int n : {1, 2, 3, 4}) {
    const Calibration ball = solve_ball(Dimension(n), 1.5);
    const double integral =
        o::radial_integral([&](double r) { return eval(ball.profile, r).div_value; }, n, 0.0, 1.5);
    CHECK(integral == doctest::Approx(-unit_sphere_area(n) * std::pow(1.5, n - 1)).epsilon(1e-9));
  }
  // Saint-Venant function of the unit ball in 3d: w = (1 - r^2) / 6
  const o::Expr w{{1.0 / 6.0, 0.0, 0}, {-1.0 / 6.0, 2.0, 0}};
  const double exact = 4.0 * M_PI / 45.0;
  CHECK(o::radial_integral(w, 3, 0.0, 1.0) == doctest::Approx(exact).epsilon(1e-12));
  CHECK(o::radial_integral([&](double r) { return o::evaluate(w, r); }, 3, 0.0, 1.0) ==
        doctest::Approx(o::radial_integral(w, 3, 0.0, 1.0)).epsilon(1e-12));
  // decaying tail on an unbounded domain
  CHECK(o::radial_integral([](double r) { return std::pow(r, -5.0); }, 3, 1.0, kInfinity) ==
        doctest::Approx(4.0 * M_PI / 2.0).epsilon(1e-8));
  CHECK_THROWS_AS(o::radial_integral([](double) { return 1.0; }, 3, 1.0, kInfinity), Error);
  CHECK_THROWS_AS(o::radial_integral(o::Expr{{1.0, 0.0, 0}}, 3, 1.0, kInfinity), Error);
}
