#pragma once

#include "tvflow/radial_core.hpp"

namespace tvflow {

/// u = a 1_{B_R} (n != 2), or u = a 1_{B_R} + (t/|x|^3) 1_{|x| > R} scaled
/// by sgn(a) for n = 2. Once extinct, u = 0 and a, R are meaningless.
struct BallState {
  Dimension dim;
  double a = 0.0;
  double R = 0.0;
  double t = 0.0;
  bool extinct = false;
};

/// Closed-form evolution of a0 1_{B_R0}. a0 < 0 is handled by odd symmetry.
BallState evolve_ball(Dimension dim, double a0, double R0, double t);

/// |a0| R0^3 / (n(4n-10)) for n >= 3, +inf for n = 1, 2.
double extinction_time(Dimension dim, double a0, double R0);

/// a R^3 minus its value predicted along the trajectory from (a0, R0):
/// a0 R0^3 - n(4n-10) t for n != 2, sqrt(a0^2 R0^6 + 9t^2) + t for n = 2.
double first_integral(double a0, double R0, const BallState& state);

/// u(t, r) of the ball solution.
double profile_at(Dimension dim, double a0, double R0, double t, double r);

/// dR/dt: -n(n-4)/(R^2 |a|) for n != 2, 3R/(|a| R^3 - t) for n = 2.
double boundary_jump_speed(Dimension dim, double a, double R, double t = 0.0);

/// da/dt for a > 0: -n(n+2)/R^3 (equals -8/R^3 when n = 2).
double ball_height_speed(Dimension dim, double a, double R);

/// Integral of u, tail included for n = 2.
double ball_mass(const BallState& state);

/// |a| n omega_n R^(n-1): the height times the sphere measure.
double ball_jump_variation(const BallState& state);

/// Full total variation; adds the n = 2 tail, giving 2 pi R a + pi t / R^2.
double ball_total_variation(const BallState& state);

}  // namespace tvflow
