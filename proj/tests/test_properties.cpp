#include <doctest.h>

#include <cmath>
#include <random>

#include "random_stacks.hpp"
#include "tvflow/calibration.hpp"
#include "tvflow/stack_dynamics.hpp"

using namespace tvflow;
using tvflow::testing::natural_time;
using tvflow::testing::random_stack;

namespace {

bool spans_event(const Trajectory& tr, double t0, double t1) {
  for (const TrajectoryEvent& e : tr.events) {
    if (e.time >= t0 && e.time <= t1) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("random stacks: energy decreases and events are continuous") {
  for (int n : {1, 3, 4, 5}) {
    std::mt19937_64 rng(7000 + n);
    for (int i = 0; i < 10; ++i) {
      const Stack s = random_stack(n, rng);
      const Trajectory tr = evolve(s, natural_time(s));
      CAPTURE(n);
      CAPTURE(i);
      for (std::size_t k = 1; k < tr.steps.size(); ++k) {
        CHECK(tr.steps[k].tv <= tr.steps[k - 1].tv + 1e-8);
      }
      for (const TrajectoryEvent& e : tr.events) {
        CHECK(e.l1_jump <= 1e-6);
        if (e.kind == EventKind::FacetMerge && e.after.regions.size() > 1) {
          REQUIRE(e.after.is_stack());
          CHECK_NOTHROW(e.after.to_stack());
        }
      }
    }
  }
}

TEST_CASE("random stacks: heights move with the sign of their speed") {
  for (int n : {1, 3, 4, 5}) {
    std::mt19937_64 rng(8000 + n);
    for (int i = 0; i < 8; ++i) {
      const Stack s = random_stack(n, rng);
      const Trajectory tr = evolve(s, natural_time(s));
      std::size_t checked = 0;
      for (std::size_t k = 1; k < tr.steps.size(); ++k) {
        const StepRecord& a = tr.steps[k - 1];
        const StepRecord& b = tr.steps[k];
        if (a.radii.size() != b.radii.size() || spans_event(tr, a.t, b.t) || a.radii.empty()) continue;
        const FacetSpeeds fa = facet_speeds(Stack(Dimension(n), a.radii, a.heights));
        const FacetSpeeds fb = facet_speeds(Stack(Dimension(n), b.radii, b.heights));
        for (std::size_t j = 0; j + 1 < a.heights.size(); ++j) {
          const int sa = (fa.lambdas[j] > 0) - (fa.lambdas[j] < 0);
          const int sb = (fb.lambdas[j] > 0) - (fb.lambdas[j] < 0);
          if (sa == 0 || sa != sb) continue;
          CHECK(sa * (b.heights[j] - a.heights[j]) >= -1e-14);
          ++checked;
        }
      }
      CHECK(checked > 0);
    }
  }
}

TEST_CASE("random stacks on the line conserve mass") {
  std::mt19937_64 rng(9001);
  for (int i = 0; i < 10; ++i) {
    const Stack s = random_stack(1, rng);
    const Trajectory tr = evolve(s, natural_time(s));
    double scale = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      scale += std::abs(s.values()[k]) * 2.0 * (s.radii()[k] - (k ? s.radii()[k - 1] : 0.0));
    }
    for (const StepRecord& r : tr.steps) CHECK(std::abs(r.mass - tr.steps[0].mass) <= 1e-6 * scale);
  }
}

TEST_CASE("scaling: c u(x / L) evolves on the time scale c L^3") {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> fac(0.5, 2.0);
  for (int n : {1, 3, 4, 5}) {
    const Stack s = random_stack(n, rng);
    const double c = fac(rng), L = fac(rng);
    std::vector<double> radii = s.radii(), values = s.values();
    for (double& r : radii) r *= L;
    for (double& v : values) v *= c;
    const double t = 0.5 * natural_time(s);
    EvolveOptions opts;
    opts.dt = t / 2e4;
    const Trajectory a = evolve(s, t, opts);
    opts.dt *= c * L * L * L;
    const Trajectory b = evolve(Stack(Dimension(n), radii, values), t * c * L * L * L, opts);
    REQUIRE(a.final_state.radii.size() == b.final_state.radii.size());
    for (std::size_t k = 0; k < a.final_state.radii.size(); ++k) {
      CHECK(b.final_state.radii[k] == doctest::Approx(L * a.final_state.radii[k]).epsilon(1e-6));
    }
    for (std::size_t k = 0; k < a.final_state.regions.size(); ++k) {
      CHECK(b.final_state.regions[k].value ==
            doctest::Approx(c * a.final_state.regions[k].value).epsilon(1e-6).scale(c));
    }
  }
}

TEST_CASE("odd symmetry: -u evolves into -u") {
  std::mt19937_64 rng(31337);
  for (int n : {1, 3, 5}) {
    const Stack s = random_stack(n, rng);
    std::vector<double> neg = s.values();
    for (double& v : neg) v = -v;
    const double t = natural_time(s);
    const Trajectory a = evolve(s, t);
    const Trajectory b = evolve(Stack(Dimension(n), s.radii(), neg), t);
    REQUIRE(a.final_state.radii.size() == b.final_state.radii.size());
    for (std::size_t k = 0; k < a.final_state.radii.size(); ++k) {
      CHECK(b.final_state.radii[k] == doctest::Approx(a.final_state.radii[k]).epsilon(1e-9));
    }
    for (std::size_t k = 0; k < a.final_state.regions.size(); ++k) {
      CHECK(b.final_state.regions[k].value == doctest::Approx(-a.final_state.regions[k].value).epsilon(1e-9));
    }
  }
}

TEST_CASE("random domains: every calibration returned is admissible") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 7);
  std::uniform_real_distribution<double> r0(0.1, 5.0), q(1.01, 40.0);
  std::bernoulli_distribution coin;
  const double qstar = compute_qstar();
  for (int i = 0; i < 200; ++i) {
    const int n = dim(rng);
    const double a = r0(rng), Q = q(rng);
    const bool constant = coin(rng);
    const SignatureSpec sig = constant ? SignatureSpec::constant() : SignatureSpec::alternating();
    const CalibrabilityVerdict v = classify(GeneralizedAnnulus(Dimension(n), a, a * Q), sig);
    CAPTURE(n);
    CAPTURE(Q);
    CAPTURE(constant);
    CHECK(v.calibrable == (n != 2 || (constant && Q <= qstar)));
    if (!v.calibrable) continue;
    REQUIRE(v.witness);
    const Calibration& cal = *v.witness;
    for (double res : cal.admissibility.bc_residuals) CHECK(std::abs(res) <= 1e-12);
    CHECK(cal.admissibility.sup_abs_z <= 1.0 + kUnitBoundTolerance);
    for (double r : geometric_grid(a * (1 + 1e-9), a * Q * (1 - 1e-9), 100)) {
      CHECK(std::abs(ode_residual(cal.profile, r)) <= 1e-9 * (1.0 + std::abs(cal.lambda)));
    }
  }
}
