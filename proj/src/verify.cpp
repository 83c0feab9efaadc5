#include "tvflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>

#include "tvflow/ball_dynamics.hpp"
#include "tvflow/calibration.hpp"
#include "tvflow/errors.hpp"
#include "tvflow/oracle.hpp"
#include "tvflow/stack_dynamics.hpp"

namespace tvflow {

namespace {

CheckResult check(const char* suite, std::string name, double value, double threshold,
                  bool below = true, std::string detail = {}) {
  const bool pass = below ? value <= threshold : value >= threshold;
  return {suite, std::move(name), pass && std::isfinite(value), value, threshold, std::move(detail)};
}

double rel_diff(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double scale = 0.0, diff = 0.0;
  for (int i = 0; i < 4; ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / scale;
}

std::vector<CheckResult> calibration_suite() {
  const char* S = "calibration";
  std::vector<CheckResult> out;
  const double q = compute_qstar();
  out.push_back(check(S, "qstar_in_range", std::abs(q - 9.7), 0.1));
  out.push_back(check(S, "qstar_root", std::abs(m_function(q)), 1e-10));

  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> pick_n(1, 9);
  std::uniform_real_distribution<double> pick_q(1.05, 30.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    int n = pick_n(rng);
    if (n == 2) n = 10;
    const Dimension d(n);
    const double Q = pick_q(rng);
    worst = std::max(worst, rel_diff(annulus_closed_form_constant(d, 1.0, Q),
                                     annulus_coefficients(d, 1.0, Q, -1, -1)));
    worst = std::max(worst, rel_diff(annulus_closed_form_alternating(d, 1.0, Q),
                                     annulus_coefficients(d, 1.0, Q, 1, -1)));
  }
  out.push_back(check(S, "closed_forms_vs_solve_50", worst, 1e-8));

  double bc = 0.0, sup_excess = 0.0;
  for (int n = 1; n <= 7; ++n) {
    const Calibration c = solve_ball(Dimension(n), 1.0);
    for (double r : c.admissibility.bc_residuals) bc = std::max(bc, std::abs(r));
    sup_excess = std::max(sup_excess, c.admissibility.sup_abs_z - 1.0);
  }
  out.push_back(check(S, "ball_boundary_residuals", bc, 1e-12));
  out.push_back(check(S, "ball_unit_bound_excess", sup_excess, kUnitBoundTolerance));

  int wrong = 0;
  for (int n = 1; n <= 6; ++n) {
    const Dimension d(n);
    wrong += !classify(GeneralizedAnnulus::ball(d, 1.0), SignatureSpec::ball()).calibrable;
    wrong += classify(GeneralizedAnnulus::complement(d, 1.0), SignatureSpec::complement()).calibrable != (n != 2);
    wrong += classify(GeneralizedAnnulus(d, 1.0, 4.0), SignatureSpec::alternating()).calibrable != (n != 2);
  }
  wrong += !classify(GeneralizedAnnulus(Dimension(2), 1.0, 5.0), SignatureSpec::constant()).calibrable;
  wrong += classify(GeneralizedAnnulus(Dimension(2), 1.0, 20.0), SignatureSpec::constant()).calibrable;
  out.push_back(check(S, "classification_table", wrong, 0.0));
  return out;
}

std::vector<CheckResult> oracle_suite() {
  const char* S = "oracle";
  std::vector<CheckResult> out;

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick_n(1, 10);
  std::uniform_real_distribution<double> pick_q(1.1, 15.0);
  std::uniform_int_distribution<int> pick_sign(0, 1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = pick_n(rng);
    const double R0 = 0.5 + pick_q(rng) / 10.0;
    const double R1 = R0 * pick_q(rng);
    const int chi_in = pick_sign(rng) ? 1 : -1, chi_out = pick_sign(rng) ? 1 : -1;
    const auto mine = annulus_coefficients(Dimension(n), R0, R1, chi_in, chi_out);
    const auto theirs = oracle::bvp_solve(n, R0, R1, {double(-chi_in), 0.0, double(chi_out), 0.0}).c;
    worst = std::max(worst, rel_diff(mine, theirs));
  }
  out.push_back(check(S, "bvp_cross_path_100", worst, 1e-10));

  // RK4 on the n = 3 ball system from (1, 1) up to t = 0.1
  const oracle::VectorField f = [](double, const oracle::State& y) {
    return oracle::State{-15.0 / (y[1] * y[1] * y[1]), 3.0 / (y[1] * y[1] * y[0])};
  };
  const BallState exact = evolve_ball(Dimension(3), 1.0, 1.0, 0.1);
  std::vector<double> errs;
  for (double dt : {0.01, 0.005, 0.0025}) {
    const auto tr = oracle::rk4(f, {1.0, 1.0}, 0.0, 0.1, dt);
    const auto& y = tr.y.back();
    errs.push_back(std::max(std::abs(y[0] - exact.a), std::abs(y[1] - exact.R)));
  }
  out.push_back(check(S, "rk4_order", std::log2(errs[1] / errs[2]), 3.9, false));

  const Calibration ball = solve_ball(Dimension(3), 1.0);
  auto fd = [&](std::size_t count) {
    const auto g = oracle::sample(3, ball.profile.coefficients(), geometric_grid(0.1, 1.0, count));
    return oracle::fd_ode_residual(g, 3, ball.lambda);
  };
  out.push_back(check(S, "fd_residual_order", std::log2(fd(101) / fd(201)), 1.9, false));
  return out;
}

std::vector<CheckResult> dynamics_suite() {
  const char* S = "dynamics";
  std::vector<CheckResult> out;
  for (int n : {1, 3, 4, 5, 6}) {
    const Dimension d(n);
    const double t_end = n == 1 ? 1.0 : 0.9 * extinction_time(d, 1.0, 1.0);
    const Trajectory tr = evolve(Stack(d, {1.0}, {1.0, 0.0}), t_end);
    double err = 0.0;
    for (const StepRecord& r : tr.steps) {
      const BallState b = evolve_ball(d, 1.0, 1.0, r.t);
      err = std::max({err, std::abs(r.heights[0] - b.a), std::abs(r.radii[0] - b.R) / std::max(1.0, b.R)});
    }
    out.push_back(check(S, "ball_oracle_n" + std::to_string(n), err, 1e-6));
  }

  const Trajectory tr2 = evolve_n2(Stack(Dimension(2), {1.0}, {1.0, 0.0}), 1.0);
  double err = 0.0, drift = 0.0;
  const double m0 = tr2.steps.front().mass;
  for (const StepRecord& r : tr2.steps) {
    const BallState b = evolve_ball(Dimension(2), 1.0, 1.0, r.t);
    err = std::max({err, std::abs(r.heights[0] - b.a), std::abs(r.radii[0] - b.R)});
    drift = std::max(drift, std::abs(r.mass - m0));
  }
  out.push_back(check(S, "ball_oracle_n2", err, 1e-5));
  out.push_back(check(S, "mass_conservation_n2", drift, 1e-6));
  return out;
}

}  // namespace

std::vector<CheckResult> run_verify(const std::string& suite) {
  std::vector<std::future<std::vector<CheckResult>>> jobs;
  const bool all = suite == "all";
  if (!all && suite != "calibration" && suite != "dynamics" && suite != "oracle") {
    throw domain_error("unknown verify suite '" + suite + "'");
  }
  if (all || suite == "calibration") jobs.push_back(std::async(std::launch::async, calibration_suite));
  if (all || suite == "oracle") jobs.push_back(std::async(std::launch::async, oracle_suite));
  if (all || suite == "dynamics") jobs.push_back(std::async(std::launch::async, dynamics_suite));
  std::vector<CheckResult> out;
  for (auto& j : jobs) {
    auto part = j.get();
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace tvflow
