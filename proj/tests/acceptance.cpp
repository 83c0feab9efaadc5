#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "random_stacks.hpp"
#include "tvflow/ball_dynamics.hpp"
#include "tvflow/calibration.hpp"
#include "tvflow/oracle.hpp"
#include "tvflow/scenario.hpp"
#include "tvflow/stack_dynamics.hpp"

using namespace tvflow;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  double limit_seconds = 0.0;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "FAILED " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

double rel_diff(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double scale = 0.0, diff = 0.0;
  for (int i = 0; i < 4; ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / scale;
}

struct CalibrationStats {
  double bc = 0.0;
  double residual = 0.0;
  double sup = 0.0;
};

void absorb(CalibrationStats& st, const Calibration& cal, const std::vector<double>& grid) {
  for (double r : cal.admissibility.bc_residuals) st.bc = std::max(st.bc, std::abs(r));
  st.sup = std::max(st.sup, cal.admissibility.sup_abs_z);
  for (double r : grid) st.residual = std::max(st.residual, std::abs(ode_residual(cal.profile, r)));
}

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& p, std::vector<std::string>* header) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      if (header) *header = cells;
      first = false;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(c.empty() ? std::nan("") : std::stod(c));
    rows.push_back(row);
  }
  return rows;
}

Outcome criterion1() {
  Outcome o;
  o.limit_seconds = 0.1;
  const double q = compute_qstar();
  o.require(q >= 9.6 && q <= 9.8, "Q* in [9.6, 9.8]");
  o.require(std::abs(m_function(q)) <= 1e-10, "|m(Q*)| <= 1e-10");
  o.require(q > 3.0, "Q* > 3");
  char buf[96];
  std::snprintf(buf, sizeof buf, "Q* = %.15f, |m(Q*)| = %s", q, fmt(std::abs(m_function(q))).c_str());
  o.note(buf);
  return o;
}

Outcome criterion2() {
  Outcome o;
  o.limit_seconds = 5.0;
  CalibrationStats st;
  for (int n = 1; n <= 7; ++n) {
    const Calibration c = solve_ball(Dimension(n), 1.0);
    absorb(st, c, geometric_grid(1e-3, 1.0 - 1e-9, 100));
  }
  for (int n : {1, 3, 4, 5, 6}) {
    const CalibrabilityVerdict v = solve_complement(Dimension(n), 1.0);
    o.require(v.calibrable && v.witness.has_value(), "complement n=" + std::to_string(n) + " calibrable");
    if (v.witness) absorb(st, *v.witness, geometric_grid(1.0 + 1e-9, 1e3, 100));
  }
  std::mt19937_64 rng(515151);
  const int dims[] = {1, 3, 4, 5, 6, 7};
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_real_distribution<double> pick_q(1.0, 50.0);
  double closed = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int n = dims[pick(rng)];
    double Q = pick_q(rng);
    if (Q <= 1.0) Q = 1.0 + 1e-3;
    const Dimension d(n);
    for (bool constant : {true, false}) {
      const SignatureSpec sig = constant ? SignatureSpec::constant() : SignatureSpec::alternating();
      const CalibrabilityVerdict v = solve_annulus(d, 1.0, Q, sig);
      o.require(v.calibrable && v.witness.has_value(), "annulus n=" + std::to_string(n) + " Q=" + fmt(Q));
      if (v.witness) absorb(st, *v.witness, geometric_grid(1.0 + 1e-9, Q * (1.0 - 1e-9), 100));
    }
    closed = std::max(closed, rel_diff(annulus_closed_form_constant(d, 1.0, Q), annulus_coefficients(d, 1.0, Q, -1, -1)));
    closed = std::max(closed, rel_diff(annulus_closed_form_alternating(d, 1.0, Q), annulus_coefficients(d, 1.0, Q, 1, -1)));
  }
  o.require(st.bc <= 1e-12, "boundary residuals <= 1e-12");
  o.require(st.residual <= 1e-9, "ODE residual <= 1e-9");
  o.require(st.sup <= 1.0 + 1e-10, "sup|z| <= 1 + 1e-10");
  o.require(closed <= 1e-8, "closed forms vs solve <= 1e-8");
  o.note("bc " + fmt(st.bc) + ", ode " + fmt(st.residual) + ", sup-1 " + fmt(st.sup - 1.0) + ", closed forms " +
         fmt(closed));
  return o;
}

Outcome criterion3() {
  Outcome o;
  int wrong = 0;
  for (int n = 1; n <= 7; ++n) {
    const Dimension d(n);
    wrong += !classify(GeneralizedAnnulus::ball(d, 1.0), SignatureSpec::ball()).calibrable;
    wrong += classify(GeneralizedAnnulus::complement(d, 1.0), SignatureSpec::complement()).calibrable != (n != 2);
    for (double Q : {1.2, 3.0, 9.0, 30.0}) {
      wrong += classify(GeneralizedAnnulus(d, 1.0, Q), SignatureSpec::alternating()).calibrable != (n != 2);
    }
  }
  o.require(wrong == 0, "ball/complement/non-constant table (" + std::to_string(wrong) + " mismatches)");

  const double qstar = compute_qstar();
  const Dimension d2(2);
  int grid_wrong = 0, flips = 0;
  double flip_at = 0.0, prev_q = 0.0;
  bool prev = true;
  for (int i = 1; i <= 1000; ++i) {
    const double Q = 1.0 + 29.0 * i / 1000.0;
    const bool ok = classify(GeneralizedAnnulus(d2, 1.0, Q), SignatureSpec::constant()).calibrable;
    grid_wrong += ok != (Q <= qstar);
    if (i > 1 && ok != prev) {
      ++flips;
      flip_at = 0.5 * (prev_q + Q);
    }
    prev = ok;
    prev_q = Q;
  }
  o.require(grid_wrong == 0, "n=2 constant verdict equals Q <= Q* on the 1000-point grid");
  o.require(flips == 1 && std::abs(flip_at - qstar) <= 29.0 / 1000.0, "single flip within one cell of Q*");
  o.note("n=2 verdict flips at Q ~ " + fmt(flip_at) + " (Q* = " + fmt(qstar) + ")");
  return o;
}

Outcome criterion4() {
  Outcome o;
  o.limit_seconds = 10.0;
  for (int n : {3, 4, 5, 6}) {
    const Dimension d(n);
    const double expect = 1.0 / (n * (4.0 * n - 10.0));
    const Trajectory tr = evolve(Stack(d, {1.0}, {1.0, 0.0}), 1.5 * expect);
    const bool got = tr.extinction_time.has_value();
    const double err = got ? std::abs(*tr.extinction_time - expect) / expect : INFINITY;
    o.require(err <= 1e-4, "extinction time n=" + std::to_string(n));
    o.note("t* n=" + std::to_string(n) + " rel err " + fmt(err));
    if (n == 4) {
      double drift = 0.0;
      for (const StepRecord& r : tr.steps) {
        if (!r.radii.empty()) drift = std::max(drift, std::abs(r.radii[0] - 1.0));
      }
      o.require(drift <= 1e-10, "n=4 radius constant");
      o.note("n=4 |R-1| " + fmt(drift));
    }
    if (n == 3) {
      const double ratio = evolve_ball(d, 1.0, 1.0, 0.9 * expect).R;
      EvolveOptions opts;
      opts.output_times = {0.9 * expect};
      const Trajectory part = evolve(Stack(d, {1.0}, {1.0, 0.0}), 0.9 * expect, opts);
      const double numeric = part.outputs[0].radii[0];
      o.require(ratio > 3.0 && numeric > 3.0, "n=3 R(0.9 t*) > 3");
      o.note("n=3 R(0.9t*) " + fmt(ratio) + " (integrator " + fmt(numeric) + ")");
    }
  }
  double fi = 0.0;
  for (int n = 1; n <= 7; ++n) {
    const Dimension d(n);
    const double t_end = (n <= 2) ? 10.0 : 0.99 * extinction_time(d, 1.0, 1.0);
    for (int i = 0; i <= 200; ++i) {
      const double t = t_end * i / 200.0;
      const BallState b = evolve_ball(d, 1.0, 1.0, t);
      fi = std::max(fi, std::abs(first_integral(1.0, 1.0, b)) / (1.0 + std::abs(b.a * b.R * b.R * b.R)));
      if (n != 2 && n != 4) {
        const double lhs = std::pow(b.a, n - 4.0), rhs = std::pow(b.R, n + 2.0);
        fi = std::max(fi, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
      }
    }
  }
  o.require(fi <= 1e-10, "first integrals constant");
  o.note("first integrals " + fmt(fi));
  return o;
}

Outcome criterion5() {
  Outcome o;
  double drift = 0.0, min_gap = INFINITY;
  for (int n : {1, 2}) {
    const Dimension d(n);
    const Stack ball(d, {1.0}, {1.0, 0.0});
    const Trajectory tr = n == 1 ? evolve(ball, 10.0) : evolve_n2(ball, 10.0);
    const double m0 = ball_mass(evolve_ball(d, 1.0, 1.0, 0.0));
    for (const StepRecord& r : tr.steps) {
      drift = std::max(drift, std::abs(r.mass - m0) / m0);
      drift = std::max(drift, std::abs(ball_mass(evolve_ball(d, 1.0, 1.0, r.t)) - m0) / m0);
      if (n == 2 && r.t > 0.0) {
        min_gap = std::min(min_gap, r.heights[0] - r.t / std::pow(r.radii[0], 3));
        const BallState b = evolve_ball(d, 1.0, 1.0, r.t);
        min_gap = std::min(min_gap, b.a - r.t / (b.R * b.R * b.R));
      }
    }
  }
  o.require(drift <= 1e-6, "mass conserved to 1e-6");
  o.require(min_gap > 0.0, "n=2 gap a - t/R^3 > 0");
  o.note("relative mass drift " + fmt(drift) + ", min n=2 gap " + fmt(min_gap));
  return o;
}

oracle::VectorField ball_field(int n) {
  if (n == 2) {
    return [](double t, const oracle::State& y) {
      const double R3 = y[1] * y[1] * y[1];
      return oracle::State{-8.0 / R3, 3.0 * y[1] / (y[0] * R3 - t)};
    };
  }
  return [n](double, const oracle::State& y) {
    return oracle::State{-n * (n + 2.0) / (y[1] * y[1] * y[1]), -n * (n - 4.0) / (y[1] * y[1] * y[0])};
  };
}

Outcome criterion6() {
  Outcome o;
  double worst = 0.0;
  for (int n : {1, 2, 3, 4, 5, 6}) {
    const Dimension d(n);
    const double t_end = n <= 2 ? 1.0 : std::min(1.0, 0.9 * extinction_time(d, 1.0, 1.0));
    const auto tr = oracle::rk4(ball_field(n), {1.0, 1.0}, 0.0, t_end, 1e-5);
    for (std::size_t i = 0; i < tr.t.size(); i += 97) {
      const BallState b = evolve_ball(d, 1.0, 1.0, tr.t[i]);
      worst = std::max({worst, std::abs(tr.y[i][0] - b.a), std::abs(tr.y[i][1] - b.R)});
    }
    const BallState b = evolve_ball(d, 1.0, 1.0, tr.t.back());
    worst = std::max({worst, std::abs(tr.y.back()[0] - b.a), std::abs(tr.y.back()[1] - b.R)});
  }
  o.require(worst <= 1e-7, "RK4 vs closed forms <= 1e-7");

  const Dimension d3(3);
  const BallState exact = evolve_ball(d3, 1.0, 1.0, 0.1);
  std::vector<double> errs;
  for (double dt : {0.01, 0.005, 0.0025}) {
    const auto y = oracle::rk4(ball_field(3), {1.0, 1.0}, 0.0, 0.1, dt).y.back();
    errs.push_back(std::max(std::abs(y[0] - exact.a), std::abs(y[1] - exact.R)));
  }
  const double order = std::log2(errs[1] / errs[2]);
  o.require(order >= 3.9, "RK4 order >= 3.9");

  const Calibration ball = solve_ball(d3, 1.0);
  auto fd = [&](std::size_t count) {
    return oracle::fd_ode_residual(oracle::sample(3, ball.profile.coefficients(), geometric_grid(0.1, 1.0, count)), 3,
                                   ball.lambda);
  };
  const double fd_order = std::log2(fd(101) / fd(201));
  o.require(fd_order >= 1.9, "finite-difference order >= 1.9");
  o.note("RK4 error " + fmt(worst) + ", RK4 order " + fmt(order) + ", fd order " + fmt(fd_order));
  return o;
}

Outcome criterion7() {
  Outcome o;
  const std::filesystem::path src(TVFLOW_SCENARIO_DIR);
  const auto out = std::filesystem::temp_directory_path() / "tvflow_acceptance";
  std::filesystem::create_directories(out);

  auto run = [&](const std::string& name) {
    const Scenario sc = load_scenario((src / (name + ".json")).string());
    write_outputs((out / name).string(), sc, run_scenario(sc));
    std::vector<std::vector<std::vector<double>>> snaps;
    for (std::size_t i = 0; i < sc.outputs.size(); ++i) {
      snaps.push_back(read_numeric_csv(out / (name + "_profile_" + std::to_string(i) + ".csv"), nullptr));
    }
    return snaps;
  };
  auto at = [](const std::vector<std::vector<double>>& snap, double r) {
    double best = INFINITY, u = 0.0;
    for (const auto& row : snap) {
      if (std::abs(row[1] - r) < best) {
        best = std::abs(row[1] - r);
        u = row[2];
      }
    }
    return u;
  };

  int checked = 0;
  for (int n = 1; n <= 6; ++n) {
    const std::string name = "fig3_n" + std::to_string(n);
    const auto snaps = run(name);
    std::vector<std::string> header;
    const auto traj = read_numeric_csv(out / (name + "_trajectory.csv"), &header);
    double profile_err = 0.0;
    for (const auto& snap : snaps) {
      for (const auto& row : snap) profile_err = std::max(profile_err, std::abs(row[2] - row[3]));
    }
    o.require(profile_err <= 1e-6, name + " profiles match the closed form");
    double prev_a = INFINITY, prev_R = -1.0, first_R = 1.0;
    bool a_dec = true, r_ok = true;
    for (const auto& row : traj) {
      const double a = row[3], R = row[5];
      if (std::isnan(R)) break;  // extinct
      if (!(a < prev_a) && row[0] > 0.0) a_dec = false;
      if (prev_R > 0.0) {
        if (n <= 3 && !(R > prev_R)) r_ok = false;
        if (n == 4 && std::abs(R - first_R) > 1e-10) r_ok = false;
        if (n >= 5 && !(R < prev_R)) r_ok = false;
      }
      prev_a = a;
      prev_R = R;
    }
    o.require(a_dec, name + " a decreasing");
    o.require(r_ok, name + " R monotone per dimension");
    if (n == 2) {
      double tail = 0.0;
      for (std::size_t i = 1; i < snaps.size(); ++i) {
        const double t = snaps[i][0][0];
        for (const auto& row : snaps[i]) {
          if (row[1] > traj.back()[5] * 1.01) tail = std::max(tail, std::abs(row[2] - t / std::pow(row[1], 3)));
        }
      }
      o.require(tail <= 1e-12, "n=2 t/r^3 tail present");
    }
    ++checked;
  }

  for (int n = 1; n <= 6; ++n) {
    const std::string name = "fig5_n" + std::to_string(n);
    const auto snaps = run(name);
    const auto traj = read_numeric_csv(out / (name + "_trajectory.csv"), nullptr);
    bool ok = true;
    for (std::size_t i = 1; i < traj.size(); ++i) {
      if (!(traj[i][3] > traj[i - 1][3]) || !(traj[i][4] < traj[i - 1][4])) ok = false;
    }
    o.require(ok, name + " hole rises and ring falls");
    o.require(traj[1][6] < traj[0][6], name + " inner edge starts moving inwards");
    o.require(std::abs(at(snaps.back(), 0.0) - traj.back()[3]) < 1e-12, name + " snapshot agrees with trajectory");
    ++checked;
  }

  {
    const Scenario sc = load_scenario((src / "fig6_thick_annulus.json").string());
    const Trajectory tr = run_scenario(sc);
    write_outputs((out / "fig6").string(), sc, tr);
    const EvolutionState& first = tr.outputs.front();
    const EvolutionState& last = tr.outputs.back();
    o.require(first.bend_count() == 2, "fig6 interior bending region at t=0");
    double tail = 0.0;
    bool stack_like = true;
    for (std::size_t k = 0; k < last.regions.size(); ++k) {
      if (!last.regions[k].bend) continue;
      if (k + 1 != last.regions.size()) stack_like = false;
      tail = std::max(tail, std::abs(last.region_value(k, last.lower(k) * (1 + 1e-12))));
    }
    o.require(stack_like && tail <= 1e-3, "fig6 state at t=6 is a stack within 1e-3");
    const auto snap = read_numeric_csv(out / "fig6_profile_3.csv", nullptr);
    o.require(at(snap, 0.0) > 0.9 && at(snap, 25.0) <= 1e-3, "fig6 last profile is a plateau with a small tail");
    o.note("fig6 tail at t=6 " + fmt(tail));
    ++checked;
  }
  std::filesystem::remove_all(out);
  o.note(std::to_string(checked) + " figure scenarios regenerated");
  return o;
}

Outcome criterion8() {
  Outcome o;
  o.limit_seconds = 60.0;
  double worst_tv = 0.0, worst_l1 = 0.0;
  int runs = 0, events = 0;
  for (int n : {1, 3, 4, 5}) {
    std::mt19937_64 rng(424242 + n);
    for (int i = 0; i < 20; ++i) {
      const Stack s = testing::random_stack(n, rng);
      const Trajectory tr = evolve(s, testing::natural_time(s));
      for (std::size_t k = 1; k < tr.steps.size(); ++k) {
        worst_tv = std::max(worst_tv, tr.steps[k].tv - tr.steps[k - 1].tv);
      }
      for (const TrajectoryEvent& e : tr.events) {
        worst_l1 = std::max(worst_l1, e.l1_jump);
        ++events;
      }
      ++runs;
    }
  }
  o.require(worst_tv <= 1e-8, "TV non-increasing (1e-8 per step)");
  o.require(worst_l1 <= 1e-6, "L1 jump across events <= 1e-6");
  o.note(std::to_string(runs) + " runs, " + std::to_string(events) + " events, max TV increase " + fmt(worst_tv) +
         ", max L1 jump " + fmt(worst_l1));
  return o;
}

}  // namespace

int main() {
  struct Item {
    const char* title;
    std::function<Outcome()> run;
  };
  const Item items[] = {
      {"Q* reproduction", criterion1},
      {"calibration correctness", criterion2},
      {"classification table", criterion3},
      {"ball dynamics", criterion4},
      {"conservation and gap for n <= 2", criterion5},
      {"oracle equivalence", criterion6},
      {"figure reproduction", criterion7},
      {"property suite", criterion8},
  };
  int failures = 0;
  int index = 1;
  for (const Item& item : items) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = item.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.limit_seconds > 0.0) {
      o.require(secs < o.limit_seconds, "runtime < " + fmt(o.limit_seconds) + " s");
    }
    std::printf("%s  criterion %d (%s): %s [%.3f s]\n", o.pass ? "PASS" : "FAIL", index, item.title,
                o.detail.c_str(), secs);
    failures += !o.pass;
    ++index;
  }
  std::printf("%d of 8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
