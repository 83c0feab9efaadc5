#include <algorithm>
#include <cmath>
#include <numbers>

#include "tvflow/calibration.hpp"
#include "tvflow/errors.hpp"
#include "tvflow/numerics.hpp"
#include "tvflow/stack_dynamics.hpp"

namespace tvflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Index j with r[j] <= x < r[j+1], or -1 / size-1 when clamped.
std::ptrdiff_t segment(const std::vector<double>& r, double x) {
  const auto it = std::upper_bound(r.begin(), r.end(), x);
  return static_cast<std::ptrdiff_t>(it - r.begin()) - 1;
}

double interpolate(const std::vector<double>& r, const std::vector<double>& v, double x) {
  if (x <= r.front()) return v.front();
  if (x >= r.back()) return v.back();
  const auto j = static_cast<std::size_t>(segment(r, x));
  const double w = (x - r[j]) / (r[j + 1] - r[j]);
  return v[j] + w * (v[j + 1] - v[j]);
}

// int_a^b [ (al + be r) - sigma (t - ga - de r) / r^3 ] 2 pi r dr
double piece_mass(double al, double be, double ga, double de, int sigma, double t, double a,
                  double b) {
  if (!(b > a)) return 0.0;
  if (std::isinf(b)) {
    if (al != 0.0 || be != 0.0 || de != 0.0) {
      throw Error(ErrorKind::Internal, "bend_mass: exterior bending region with nonzero base value");
    }
    return -kTwoPi * sigma * (t - ga) / a;
  }
  const double flat = al * (b * b - a * a) / 2.0 + be * (b * b * b - a * a * a) / 3.0;
  const double bent = (t - ga) * (1.0 / a - 1.0 / b) - de * std::log(b / a);
  return kTwoPi * (flat - sigma * bent);
}

}  // namespace

double BendingProfile::entry_value(double radius) const { return interpolate(r, u_entry, radius); }

double BendingProfile::entry_time(double radius) const { return interpolate(r, t_entry, radius); }

double BendingProfile::value(double radius, double t) const {
  return entry_value(radius) - sigma * (t - entry_time(radius)) / (radius * radius * radius);
}

void BendingProfile::append(double radius, double u, double t) {
  if (!r.empty() && radius <= r.back()) return;
  r.push_back(radius);
  u_entry.push_back(u);
  t_entry.push_back(t);
}

void BendingProfile::prepend(double radius, double u, double t) {
  if (!r.empty() && radius >= r.front()) return;
  r.insert(r.begin(), radius);
  u_entry.insert(u_entry.begin(), u);
  t_entry.insert(t_entry.begin(), t);
}

double bend_mass(const BendingProfile& p, double lo, double hi, double t) {
  const auto& r = p.r;
  double total = 0.0;
  // below the first sample
  total += piece_mass(p.u_entry.front(), 0.0, p.t_entry.front(), 0.0, p.sigma, t, lo,
                      std::min(hi, r.front()));
  for (std::size_t j = 0; j + 1 < r.size(); ++j) {
    const double a = std::max(lo, r[j]);
    const double b = std::min(hi, r[j + 1]);
    if (!(b > a)) continue;
    const double be = (p.u_entry[j + 1] - p.u_entry[j]) / (r[j + 1] - r[j]);
    const double de = (p.t_entry[j + 1] - p.t_entry[j]) / (r[j + 1] - r[j]);
    total += piece_mass(p.u_entry[j] - be * r[j], be, p.t_entry[j] - de * r[j], de, p.sigma, t, a, b);
  }
  total += piece_mass(p.u_entry.back(), 0.0, p.t_entry.back(), 0.0, p.sigma, t,
                      std::max(lo, r.back()), hi);
  return total;
}

double bend_variation(const BendingProfile& p, double lo, double hi, double t) {
  const double hi_eff = std::isfinite(hi) ? hi : std::max(lo, p.r.back());
  double total = 0.0;
  if (hi_eff > lo) {
    std::vector<double> grid = geometric_grid(lo, hi_eff, 512);
    for (double x : p.r) {
      if (x > lo && x < hi_eff) grid.push_back(x);
    }
    std::sort(grid.begin(), grid.end());
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double du = std::abs(p.value(grid[i], t) - p.value(grid[i - 1], t));
      total += du * std::numbers::pi * (grid[i] + grid[i - 1]);
    }
  }
  if (!std::isfinite(hi)) {
    const double rs = std::max(lo, p.r.back());
    total += 3.0 * std::numbers::pi * std::abs(t - p.t_entry.back()) / (rs * rs);
  }
  return total;
}

bool apply_planar_layout(EvolutionState& s) {
  if (!s.dim.planar()) return false;
  const double qstar = compute_qstar();
  bool changed = false;

  auto make_bend = [&](std::size_t k, int sigma) {
    Region& reg = s.regions[k];
    const double lo = s.lower(k), hi = s.upper(k);
    BendingProfile p;
    p.sigma = sigma;
    p.append(lo, reg.value, s.t);
    if (std::isfinite(hi)) p.append(hi, reg.value, s.t);
    reg.bend = true;
    reg.profile = std::move(p);
    changed = true;
  };

  const std::size_t last = s.regions.size() - 1;
  if (last == 0) return false;
  if (!s.regions[last].bend) {
    if (s.regions[last].value != 0.0) throw Error(ErrorKind::Internal, "layout: exterior value must be 0");
    const double r = s.radii[last - 1];
    const double inside = s.region_value(last - 1, r);
    make_bend(last, sign_of(0.0 - inside));
  }

  for (std::size_t k = 1; k + 1 < s.regions.size(); ++k) {
    if (s.regions[k].bend) continue;
    if (s.kinds[k - 1] != InterfaceKind::Jump || s.kinds[k] != InterfaceKind::Jump) continue;
    const double lo = s.radii[k - 1], hi = s.radii[k];
    const double a = s.regions[k].value;
    const int z_lo = sign_of(a - s.region_value(k - 1, lo));
    const int z_hi = sign_of(s.region_value(k + 1, hi) - a);
    if (z_lo == 0 || z_hi == 0) throw Error(ErrorKind::Internal, "layout: equal neighbouring values");
    if (z_lo == z_hi) {
      make_bend(k, z_lo);
      continue;
    }
    if (hi / lo > qstar * (1.0 + 1e-12)) {
      const double hinge = hi / qstar;
      Region bend;
      bend.bend = true;
      bend.profile.sigma = z_lo;
      bend.profile.append(lo, a, s.t);
      bend.profile.append(hinge, a, s.t);
      s.regions.insert(s.regions.begin() + static_cast<std::ptrdiff_t>(k), std::move(bend));
      s.radii.insert(s.radii.begin() + static_cast<std::ptrdiff_t>(k), hinge);
      s.kinds.insert(s.kinds.begin() + static_cast<std::ptrdiff_t>(k), InterfaceKind::Hinge);
      changed = true;
      ++k;
    }
  }
  return changed;
}

Trajectory evolve_n2(const Stack& stack, double t_end, const EvolveOptions& opts) {
  if (!stack.dim().planar()) throw domain_error("evolve_n2: requires n = 2");
  return evolve_state(EvolutionState::from_stack(stack), t_end, opts);
}

}  // namespace tvflow
