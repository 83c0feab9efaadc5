#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tvflow/radial_core.hpp"

namespace tvflow {

/// Piecewise-constant radial datum: values[0] on the ball of radius
/// radii[0], values[k] on the annulus (radii[k-1], radii[k]), and
/// values[N] = 0 outside radii[N-1].
class Stack {
 public:
  Stack(Dimension dim, std::vector<double> radii, std::vector<double> values);

  Dimension dim() const noexcept { return dim_; }
  const std::vector<double>& radii() const noexcept { return radii_; }
  const std::vector<double>& values() const noexcept { return values_; }
  /// Number of jumps N.
  std::size_t size() const noexcept { return radii_.size(); }
  double value_at(double r) const;

 private:
  Dimension dim_;
  std::vector<double> radii_;
  std::vector<double> values_;
};

struct FacetSpeeds {
  std::vector<double> lambdas;  // lambda^0 .. lambda^N
  std::vector<double> jumps;    // d^0 .. d^(N-1)
};

/// Speeds of all facets and jump interfaces of a stack (n != 2).
FacetSpeeds facet_speeds(const Stack& stack);

/// n = 2 bending region: u(t, r) = u_entry(r) - sigma (t - t_entry(r)) / r^3,
/// with u_entry and t_entry interpolated linearly between samples and held
/// constant beyond the first and last sample.
struct BendingProfile {
  int sigma = 1;
  std::vector<double> r;
  std::vector<double> u_entry;
  std::vector<double> t_entry;

  double entry_value(double radius) const;
  double entry_time(double radius) const;
  double value(double radius, double t) const;
  void append(double radius, double u, double t);
  void prepend(double radius, double u, double t);
};

struct Region {
  bool bend = false;
  double value = 0.0;  // facet height; unused for bends
  BendingProfile profile;
};

/// A facet boundary is either a jump of u or (n = 2) a hinge where a facet
/// meets a bending region continuously.
enum class InterfaceKind { Jump, Hinge };

/// Full solution state: regions ordered outwards from the origin, separated
/// by radii[k] between regions k and k+1. For n != 2 every region is a facet
/// and the last one has value 0.
struct EvolutionState {
  Dimension dim{1};
  double t = 0.0;
  std::vector<Region> regions;
  std::vector<double> radii;
  std::vector<InterfaceKind> kinds;

  static EvolutionState from_stack(const Stack& stack, double t = 0.0);

  /// True when all regions are facets and the outermost is 0.
  bool is_stack() const;
  Stack to_stack() const;
  bool extinct() const;

  double lower(std::size_t k) const { return k == 0 ? 0.0 : radii[k - 1]; }
  double upper(std::size_t k) const { return k + 1 == regions.size() ? kInfinity : radii[k]; }
  /// u of region k at radius r.
  double region_value(std::size_t k, double r) const;
  /// u at r; on an interface the outer value is returned.
  double u(double r) const;
  std::size_t bend_count() const;
};

enum class EventKind { FacetMerge, InnerCollapse, AnnulusCollapse, Extinction, BendingTransition };

const char* to_string(EventKind kind);

struct TrajectoryEvent {
  EventKind kind = EventKind::FacetMerge;
  double time = 0.0;
  std::size_t index = 0;  // region index before the event
  double l1_jump = 0.0;   // L1 distance of the profiles across the event
  EvolutionState after;
};

struct StepRecord {
  double t = 0.0;
  std::vector<double> radii;
  std::vector<double> heights;  // facet heights; NaN for bending regions
  double mass = 0.0;
  double tv = 0.0;
};

struct EvolveOptions {
  double dt = 0.0;         // 0: (t_end - t0) / 1e4
  double event_tol = 0.0;  // 0: 1e-10 * t_end
  double limiter = 0.05;   // max relative change of any gap per step
  std::size_t max_events = 0;  // 0: 10 * N (at least 10)
  std::size_t max_steps = 4'000'000;
  std::vector<double> output_times;
  bool record_steps = true;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  std::vector<TrajectoryEvent> events;
  std::vector<EvolutionState> outputs;  // aligned with the requested times
  EvolutionState final_state;
  std::optional<double> extinction_time;
};

/// One RK4 step without event handling. Throws an Integration error if the
/// step leaves the admissible configuration space.
EvolutionState step(const EvolutionState& state, double dt);

/// n != 2 stacks.
Trajectory evolve(const Stack& stack, double t_end, const EvolveOptions& opts = {});

/// n = 2 stacks, with bending regions.
Trajectory evolve_n2(const Stack& stack, double t_end, const EvolveOptions& opts = {});

/// Any dimension, from an arbitrary state (restarts). For n = 2 the region
/// layout is re-applied first.
Trajectory evolve_state(EvolutionState state, double t_end, const EvolveOptions& opts = {});

/// Splits or bends the n = 2 facets that have no admissible calibration:
/// exterior, monotone steps, and extremum annuli thicker than Q*.
/// Returns true if anything changed.
bool apply_planar_layout(EvolutionState& state);

struct MassEnergy {
  double mass = 0.0;
  double tv = 0.0;
};

MassEnergy mass_and_energy(const EvolutionState& state);

/// Integral of |u_a - u_b| over R^n.
double l1_distance(const EvolutionState& a, const EvolutionState& b);

/// Mass of one n = 2 bending region over [lo, hi] at time t, exact for the
/// piecewise-linear entry data.
double bend_mass(const BendingProfile& p, double lo, double hi, double t);

/// Total variation of u inside one bending region (jumps excluded).
double bend_variation(const BendingProfile& p, double lo, double hi, double t);

}  // namespace tvflow
