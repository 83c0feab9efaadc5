#include "tvflow/ball_dynamics.hpp"

#include <cmath>
#include <numbers>

#include "tvflow/errors.hpp"
#include "tvflow/numerics.hpp"

namespace tvflow {

namespace {

void check_datum(double a0, double R0, const char* where) {
  if (!(R0 > 0.0) || !std::isfinite(R0)) throw domain_error(std::string(where) + ": R0 must be positive");
  if (a0 == 0.0 || !std::isfinite(a0)) throw domain_error(std::string(where) + ": a0 must be finite and nonzero");
}

}  // namespace

BallState evolve_ball(Dimension dim, double a0, double R0, double t) {
  check_datum(a0, R0, "evolve_ball");
  if (!(t >= 0.0)) throw domain_error("evolve_ball: t must be non-negative");
  const int n = dim.value();
  const double sign = a0 > 0.0 ? 1.0 : -1.0;
  const double k = std::abs(a0) * R0 * R0 * R0;

  BallState st{dim, a0, R0, t, false};
  if (t == 0.0) return st;
  if (n == 2) {
    const double s = std::sqrt(k * k + 9.0 * t * t);
    st.R = R0 * (3.0 * t + s) / k;
    st.a = sign * (s + t) / (st.R * st.R * st.R);
    return st;
  }
  const double m = 4.0 * n - 10.0;
  const double s = 1.0 - n * m * t / k;
  if (s <= 0.0) {
    st.a = 0.0;
    st.R = 0.0;
    st.extinct = true;
    return st;
  }
  st.a = sign * std::abs(a0) * std::pow(s, (n + 2.0) / m);
  st.R = R0 * std::pow(s, (n - 4.0) / m);
  return st;
}

double extinction_time(Dimension dim, double a0, double R0) {
  check_datum(a0, R0, "extinction_time");
  const int n = dim.value();
  if (n <= 2) return kInfinity;
  return std::abs(a0) * R0 * R0 * R0 / (n * (4.0 * n - 10.0));
}

double first_integral(double a0, double R0, const BallState& state) {
  const int n = state.dim.value();
  const double k = std::abs(a0) * R0 * R0 * R0;
  const double expected = n == 2 ? std::sqrt(k * k + 9.0 * state.t * state.t) + state.t
                                 : k - n * (4.0 * n - 10.0) * state.t;
  return std::abs(state.a) * state.R * state.R * state.R - expected;
}

double profile_at(Dimension dim, double a0, double R0, double t, double r) {
  if (!(r > 0.0)) throw domain_error("profile_at: r must be positive");
  const BallState st = evolve_ball(dim, a0, R0, t);
  if (st.extinct) return 0.0;
  if (r < st.R) return st.a;
  if (dim.planar()) return (a0 > 0.0 ? 1.0 : -1.0) * t / (r * r * r);
  return 0.0;
}

double boundary_jump_speed(Dimension dim, double a, double R, double t) {
  if (a == 0.0) throw Error(ErrorKind::Singularity, "boundary_jump_speed: a = 0");
  if (!(R > 0.0)) throw domain_error("boundary_jump_speed: R must be positive");
  const int n = dim.value();
  const double abs_a = std::abs(a);
  if (n == 2) return 3.0 * R / (abs_a * R * R * R - t);
  return -n * (n - 4.0) / (R * R * abs_a);
}

double ball_height_speed(Dimension dim, double a, double R) {
  const int n = dim.value();
  return -sign_of(a) * n * (n + 2.0) / (R * R * R);
}

double ball_mass(const BallState& state) {
  if (state.extinct) return 0.0;
  const int n = state.dim.value();
  double m = state.a * unit_ball_volume(n) * std::pow(state.R, n);
  if (n == 2) m += sign_of(state.a) * 2.0 * std::numbers::pi * state.t / state.R;
  return m;
}

double ball_jump_variation(const BallState& state) {
  if (state.extinct) return 0.0;
  const int n = state.dim.value();
  return std::abs(state.a) * unit_sphere_area(n) * std::pow(state.R, n - 1.0);
}

double ball_total_variation(const BallState& state) {
  if (state.extinct) return 0.0;
  if (!state.dim.planar()) return ball_jump_variation(state);
  return 2.0 * std::numbers::pi * state.R * std::abs(state.a) +
         std::numbers::pi * state.t / (state.R * state.R);
}

}  // namespace tvflow
