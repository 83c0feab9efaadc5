#include "tvflow/stack_dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "tvflow/calibration.hpp"
#include "tvflow/errors.hpp"
#include "tvflow/numerics.hpp"

namespace tvflow {

Stack::Stack(Dimension dim, std::vector<double> radii, std::vector<double> values)
    : dim_(dim), radii_(std::move(radii)), values_(std::move(values)) {
  if (radii_.empty()) throw domain_error("stack: at least one jump radius required");
  if (values_.size() != radii_.size() + 1) throw domain_error("stack: need one more value than radii");
  if (values_.back() != 0.0) throw domain_error("stack: the outermost value must be 0");
  for (std::size_t k = 0; k < radii_.size(); ++k) {
    if (!(radii_[k] > 0.0) || !std::isfinite(radii_[k])) throw domain_error("stack: radii must be positive and finite");
    if (k > 0 && !(radii_[k] > radii_[k - 1])) throw domain_error("stack: radii must be strictly increasing");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) throw domain_error("stack: values must be finite");
    if (k > 0 && values_[k] == values_[k - 1]) throw domain_error("stack: adjacent values must differ");
  }
}

double Stack::value_at(double r) const {
  const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
  return values_[static_cast<std::size_t>(it - radii_.begin())];
}

EvolutionState EvolutionState::from_stack(const Stack& stack, double t) {
  EvolutionState s;
  s.dim = stack.dim();
  s.t = t;
  for (double v : stack.values()) s.regions.push_back(Region{false, v, {}});
  s.radii = stack.radii();
  s.kinds.assign(s.radii.size(), InterfaceKind::Jump);
  return s;
}

bool EvolutionState::is_stack() const {
  if (regions.empty() || regions.back().bend || regions.back().value != 0.0) return false;
  return std::none_of(regions.begin(), regions.end(), [](const Region& r) { return r.bend; });
}

Stack EvolutionState::to_stack() const {
  if (!is_stack()) throw domain_error("state contains bending regions");
  std::vector<double> values;
  for (const Region& r : regions) values.push_back(r.value);
  return Stack(dim, radii, values);
}

bool EvolutionState::extinct() const {
  return regions.size() == 1 && !regions[0].bend && regions[0].value == 0.0;
}

double EvolutionState::region_value(std::size_t k, double r) const {
  const Region& reg = regions[k];
  return reg.bend ? reg.profile.value(r, t) : reg.value;
}

double EvolutionState::u(double r) const {
  const auto it = std::upper_bound(radii.begin(), radii.end(), r);
  return region_value(static_cast<std::size_t>(it - radii.begin()), r);
}

std::size_t EvolutionState::bend_count() const {
  return static_cast<std::size_t>(
      std::count_if(regions.begin(), regions.end(), [](const Region& r) { return r.bend; }));
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::FacetMerge: return "FacetMerge";
    case EventKind::InnerCollapse: return "InnerCollapse";
    case EventKind::AnnulusCollapse: return "AnnulusCollapse";
    case EventKind::Extinction: return "Extinction";
    case EventKind::BendingTransition: return "BendingTransition";
  }
  return "?";
}

namespace {

// Raised inside a trial step when the configuration stops being a valid
// stack (a gap closed or a speed blew up); the caller shortens the step.
struct StepInvalid {};

struct Rates {
  std::vector<double> value;   // per region
  std::vector<double> radius;  // per interface
  std::vector<double> zpp_lo;  // per region, z'' at its inner edge
  std::vector<double> zpp_hi;  // per region, z'' at its outer edge
};

int jump_sign(const EvolutionState& s, std::size_t i) {
  const double r = s.radii[i];
  const double d = s.region_value(i + 1, r) - s.region_value(i, r);
  if (!(std::abs(d) > 0.0)) throw StepInvalid{};
  return d > 0.0 ? 1 : -1;
}

Rates compute_rates(const EvolutionState& s) {
  const std::size_t m = s.regions.size();
  Rates out;
  out.value.assign(m, 0.0);
  out.radius.assign(m - 1, 0.0);
  out.zpp_lo.assign(m, 0.0);
  out.zpp_hi.assign(m, 0.0);
  if (m == 1) return out;

  for (std::size_t k = 0; k < m; ++k) {
    if (s.regions[k].bend) continue;
    const double lo = s.lower(k), hi = s.upper(k);
    int z_lo = 0, z_hi = 0;
    if (k > 0) {
      z_lo = s.kinds[k - 1] == InterfaceKind::Hinge ? s.regions[k - 1].profile.sigma : jump_sign(s, k - 1);
    }
    if (k + 1 < m) {
      z_hi = s.kinds[k] == InterfaceKind::Hinge ? s.regions[k + 1].profile.sigma : jump_sign(s, k);
    }
    std::array<double, 4> c{};
    Interval dom{lo, hi};
    if (!(hi > lo)) throw StepInvalid{};
    if (k > 0 && k + 1 < m) {
      const AnnulusBoundary ab = annulus_boundary(s.dim, lo, hi, -z_lo, z_hi);
      out.value[k] = RadialProfile(s.dim, ab.coefficients, dom).lambda();
      out.zpp_lo[k] = ab.z2_inner;
      out.zpp_hi[k] = ab.z2_outer;
      continue;
    }
    if (k == 0) {
      c = ball_coefficients(s.dim, hi, z_hi);
    } else {
      c = complement_coefficients(s.dim, lo, -z_lo);
    }
    const RadialProfile prof(s.dim, c, dom);
    out.value[k] = prof.lambda();
    if (k > 0) out.zpp_lo[k] = eval(prof, lo).z_second;
    if (k + 1 < m) out.zpp_hi[k] = eval(prof, hi).z_second;
  }

  for (std::size_t i = m - 1; i-- > 0;) {
    if (s.kinds[i] == InterfaceKind::Hinge) {
      if (i + 2 >= m) throw Error(ErrorKind::Internal, "hinge without an outer facet boundary");
      out.radius[i] = out.radius[i + 1] / compute_qstar();
      continue;
    }
    const double r = s.radii[i];
    const double jump = s.region_value(i, r) - s.region_value(i + 1, r);
    if (!(std::abs(jump) > 0.0)) throw StepInvalid{};
    out.radius[i] = (out.zpp_hi[i] - out.zpp_lo[i + 1]) / jump;
  }
  for (double v : out.value) {
    if (!std::isfinite(v)) throw StepInvalid{};
  }
  for (double v : out.radius) {
    if (!std::isfinite(v)) throw StepInvalid{};
  }
  return out;
}

std::vector<double> pack(const EvolutionState& s) {
  std::vector<double> y;
  for (const Region& r : s.regions) {
    if (!r.bend) y.push_back(r.value);
  }
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    if (s.kinds[i] == InterfaceKind::Jump) y.push_back(s.radii[i]);
  }
  return y;
}

std::vector<double> pack_rates(const EvolutionState& s, const Rates& rt) {
  std::vector<double> y;
  for (std::size_t k = 0; k < s.regions.size(); ++k) {
    if (!s.regions[k].bend) y.push_back(rt.value[k]);
  }
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    if (s.kinds[i] == InterfaceKind::Jump) y.push_back(rt.radius[i]);
  }
  return y;
}

void unpack(EvolutionState& s, const std::vector<double>& y) {
  std::size_t j = 0;
  for (Region& r : s.regions) {
    if (!r.bend) r.value = y[j++];
  }
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    if (s.kinds[i] == InterfaceKind::Jump) s.radii[i] = y[j++];
  }
  for (std::size_t i = s.radii.size(); i-- > 0;) {
    if (s.kinds[i] == InterfaceKind::Hinge) s.radii[i] = s.radii[i + 1] / compute_qstar();
  }
}

enum class GapKind { Width, Jump, QStar };

struct Gap {
  GapKind kind;
  std::size_t index;  // region for Width/QStar, interface for Jump
  double value;
  double rate;
  bool soft;
};

// Orientation of every jump at the start of a step: sign of u_in - u_out.
std::vector<int> orientation(const EvolutionState& s) {
  std::vector<int> o(s.radii.size(), 0);
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    if (s.kinds[i] == InterfaceKind::Jump) {
      o[i] = sign_of(s.region_value(i, s.radii[i]) - s.region_value(i + 1, s.radii[i]));
    }
  }
  return o;
}

// d/dt of u of region k along an interface moving at speed v.
double value_rate(const EvolutionState& s, const Rates& rt, std::size_t k, double r, double v) {
  const Region& reg = s.regions[k];
  if (!reg.bend) return rt.value[k];
  const double h = 1e-7 * r;
  const double dudr = (reg.profile.value(r + h, s.t) - reg.profile.value(r - h, s.t)) / (2.0 * h);
  return -reg.profile.sigma / (r * r * r) + dudr * v;
}

std::vector<Gap> compute_gaps(const EvolutionState& s, const std::vector<int>& orient,
                              const Rates* rt) {
  std::vector<Gap> gaps;
  const std::size_t m = s.regions.size();
  if (m == 1) return gaps;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double lo = s.lower(k), hi = s.upper(k);
    double rate = 0.0;
    if (rt) rate = rt->radius[k] - (k > 0 ? rt->radius[k - 1] : 0.0);
    gaps.push_back({GapKind::Width, k, hi - lo, rate, false});
  }
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (s.kinds[i] != InterfaceKind::Jump) continue;
    const double r = s.radii[i];
    const double value = orient[i] * (s.region_value(i, r) - s.region_value(i + 1, r));
    double rate = 0.0;
    if (rt) {
      const double v = rt->radius[i];
      rate = orient[i] * (value_rate(s, *rt, i, r, v) - value_rate(s, *rt, i + 1, r, v));
    }
    gaps.push_back({GapKind::Jump, i, value, rate, false});
  }
  if (s.dim.planar()) {
    const double qstar = compute_qstar();
    for (std::size_t k = 1; k + 1 < m; ++k) {
      if (s.regions[k].bend) continue;
      if (s.kinds[k - 1] != InterfaceKind::Jump || s.kinds[k] != InterfaceKind::Jump) continue;
      if (orient[k - 1] != orient[k]) continue;  // monotone step: never a facet in n = 2
      const double lo = s.radii[k - 1], hi = s.radii[k];
      double rate = 0.0;
      if (rt) rate = qstar * rt->radius[k - 1] - rt->radius[k];
      gaps.push_back({GapKind::QStar, k, qstar * lo - hi, rate, true});
    }
  }
  return gaps;
}

std::size_t gap_region(const Gap& g) { return g.index; }

bool hard_valid(const std::vector<Gap>& gaps) {
  for (const Gap& g : gaps) {
    if (!std::isfinite(g.value)) return false;
    if (!g.soft && !(g.value > 0.0)) return false;
  }
  return true;
}

bool soft_crossed(const std::vector<Gap>& gaps, const EvolutionState& s) {
  for (const Gap& g : gaps) {
    if (g.soft && g.value < -1e-12 * s.radii[g.index]) return true;
  }
  return false;
}

// RK4 trial step; nullopt if any stage or the result is inadmissible.
std::optional<EvolutionState> try_step(const EvolutionState& s, double h,
                                       const std::vector<int>& orient) {
  try {
    const std::vector<double> y0 = pack(s);
    auto stage = [&](const std::vector<double>& base, const std::vector<double>& k, double f,
                     double tt) {
      EvolutionState tmp = s;
      std::vector<double> y(base.size());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = base[i] + f * k[i];
      unpack(tmp, y);
      tmp.t = tt;
      if (!hard_valid(compute_gaps(tmp, orient, nullptr))) throw StepInvalid{};
      return tmp;
    };
    const std::vector<double> k1 = pack_rates(s, compute_rates(s));
    EvolutionState s2 = stage(y0, k1, 0.5 * h, s.t + 0.5 * h);
    const std::vector<double> k2 = pack_rates(s2, compute_rates(s2));
    EvolutionState s3 = stage(y0, k2, 0.5 * h, s.t + 0.5 * h);
    const std::vector<double> k3 = pack_rates(s3, compute_rates(s3));
    EvolutionState s4 = stage(y0, k3, h, s.t + h);
    const std::vector<double> k4 = pack_rates(s4, compute_rates(s4));
    std::vector<double> y(y0.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = y0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(y[i])) return std::nullopt;
    }
    EvolutionState out = s;
    unpack(out, y);
    out.t = s.t + h;
    if (!hard_valid(compute_gaps(out, orient, nullptr))) return std::nullopt;
    return out;
  } catch (const StepInvalid&) {
    return std::nullopt;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Domain || e.kind() == ErrorKind::Internal) return std::nullopt;
    throw;
  }
}

// Bookkeeping of bending profiles for the territory that interfaces swept
// during an accepted step.
EvolutionState commit(const EvolutionState& before, EvolutionState after) {
  for (std::size_t i = 0; i < after.radii.size(); ++i) {
    const double r_old = before.radii[i], r_new = after.radii[i];
    if (r_new == r_old) continue;
    Region& inner = after.regions[i];
    Region& outer = after.regions[i + 1];
    if (after.kinds[i] == InterfaceKind::Hinge) {
      if (r_new > r_old) {
        inner.profile.append(r_new, outer.value, after.t);
      } else {
        const double mismatch = std::abs(inner.profile.value(r_new, after.t) - outer.value);
        if (mismatch > 1e-6 * std::max(1.0, std::abs(outer.value))) {
          std::ostringstream msg;
          msg << "hinge moved inwards into a bending region that does not match the facet "
                 "height (mismatch " << mismatch << " at t = " << after.t << ")";
          throw Error(ErrorKind::Unsupported, msg.str());
        }
      }
      continue;
    }
    if (outer.bend && !inner.bend && r_new < r_old) {
      outer.profile.prepend(r_new, outer.profile.value(r_old, after.t), after.t);
    } else if (inner.bend && !outer.bend && r_new > r_old) {
      inner.profile.append(r_new, inner.profile.value(r_old, after.t), after.t);
    }
  }
  return after;
}

void remove_region(EvolutionState& s, std::size_t k) {
  const auto ki = static_cast<std::ptrdiff_t>(k);
  if (k == 0) {
    s.regions.erase(s.regions.begin());
    s.radii.erase(s.radii.begin());
    s.kinds.erase(s.kinds.begin());
    return;
  }
  // a bend squeezed against a hinge leaves the facet boundary where the
  // hinge was, so the facet keeps its ratio exactly
  double mid = 0.5 * (s.radii[k - 1] + s.radii[k]);
  if (s.kinds[k] == InterfaceKind::Hinge) mid = s.radii[k];
  if (s.kinds[k - 1] == InterfaceKind::Hinge) mid = s.radii[k - 1];
  const Region& in = s.regions[k - 1];
  const Region& out = s.regions[k + 1];
  if (!s.regions[k].bend && !in.bend && !out.bend && in.value != out.value) {
    // place the merged interface so that the mass of [lo, hi] is unchanged
    const int n = s.dim.value();
    const double lo_n = std::pow(s.radii[k - 1], n), hi_n = std::pow(s.radii[k], n);
    const double r_n = (s.regions[k].value * (hi_n - lo_n) - out.value * hi_n + in.value * lo_n) /
                       (in.value - out.value);
    mid = std::pow(std::clamp(r_n, lo_n, hi_n), 1.0 / n);
  }
  s.regions.erase(s.regions.begin() + ki);
  s.radii[k - 1] = mid;
  s.kinds[k - 1] = InterfaceKind::Jump;
  s.radii.erase(s.radii.begin() + ki);
  s.kinds.erase(s.kinds.begin() + ki);
}

// Remove interface i; the outer region absorbs the inner one.
void merge_across(EvolutionState& s, std::size_t i) {
  Region& inner = s.regions[i];
  Region& outer = s.regions[i + 1];
  if (inner.bend && outer.bend) {
    const double r = s.radii[i];
    BendingProfile merged;
    merged.sigma = outer.profile.sigma;
    for (std::size_t j = 0; j < inner.profile.r.size(); ++j) {
      if (inner.profile.r[j] < r) merged.append(inner.profile.r[j], inner.profile.u_entry[j], inner.profile.t_entry[j]);
    }
    merged.append(r, outer.profile.entry_value(r), outer.profile.entry_time(r));
    for (std::size_t j = 0; j < outer.profile.r.size(); ++j) {
      if (outer.profile.r[j] > r) merged.append(outer.profile.r[j], outer.profile.u_entry[j], outer.profile.t_entry[j]);
    }
    outer.profile = std::move(merged);
  }
  const auto ii = static_cast<std::ptrdiff_t>(i);
  s.regions.erase(s.regions.begin() + ii);
  s.radii.erase(s.radii.begin() + ii);
  s.kinds.erase(s.kinds.begin() + ii);
}

void coalesce(EvolutionState& s) {
  for (std::size_t i = 0; i + 1 < s.regions.size();) {
    const Region& a = s.regions[i];
    const Region& b = s.regions[i + 1];
    if (!a.bend && !b.bend && std::abs(a.value - b.value) <= 1e-13 * std::max(1.0, std::abs(b.value))) {
      merge_across(s, i);
    } else {
      ++i;
    }
  }
}

StepRecord make_record(const EvolutionState& s) {
  StepRecord rec;
  rec.t = s.t;
  rec.radii = s.radii;
  for (const Region& r : s.regions) rec.heights.push_back(r.bend ? std::nan("") : r.value);
  const MassEnergy me = mass_and_energy(s);
  rec.mass = me.mass;
  rec.tv = me.tv;
  return rec;
}

std::string describe(const EvolutionState& s) {
  std::ostringstream o;
  o.precision(17);
  o << "t = " << s.t << ", radii = [";
  for (std::size_t i = 0; i < s.radii.size(); ++i) o << (i ? ", " : "") << s.radii[i];
  o << "], heights = [";
  for (std::size_t k = 0; k < s.regions.size(); ++k) {
    o << (k ? ", " : "");
    if (s.regions[k].bend) o << "bend"; else o << s.regions[k].value;
  }
  o << "]";
  return o.str();
}

// Process the innermost of the given gap hits and tidy the state.
TrajectoryEvent handle_event(EvolutionState& s, const Gap& g) {
  const EvolutionState before = s;
  TrajectoryEvent ev;
  ev.time = s.t;
  ev.index = gap_region(g);
  switch (g.kind) {
    case GapKind::Width:
      if (s.regions[g.index].bend) {
        ev.kind = EventKind::BendingTransition;
      } else {
        ev.kind = g.index == 0 ? EventKind::InnerCollapse : EventKind::AnnulusCollapse;
      }
      remove_region(s, g.index);
      break;
    case GapKind::Jump: {
      const bool ib = s.regions[g.index].bend, ob = s.regions[g.index + 1].bend;
      if (ib != ob) {
        throw Error(ErrorKind::Integration,
                    "a facet height met the adjacent bending region (unsupported configuration); " +
                        describe(s));
      }
      ev.kind = ib ? EventKind::BendingTransition : EventKind::FacetMerge;
      merge_across(s, g.index);
      break;
    }
    case GapKind::QStar:
      ev.kind = EventKind::BendingTransition;
      break;
  }
  coalesce(s);
  if (s.dim.planar()) {
    if (!s.regions.empty() && s.regions[0].bend) {
      throw Error(ErrorKind::Unsupported, "bending region reached the origin; " + describe(s));
    }
    apply_planar_layout(s);
  }
  ev.l1_jump = l1_distance(before, s);
  ev.after = s;
  return ev;
}

std::vector<Gap> hits(const std::vector<Gap>& gaps, double tol) {
  std::vector<Gap> out;
  for (const Gap& g : gaps) {
    if (g.soft) {
      if (g.value < 0.0) out.push_back(g);
      continue;
    }
    if (g.value <= 0.0 || (g.rate < 0.0 && g.value <= -g.rate * tol)) out.push_back(g);
  }
  std::sort(out.begin(), out.end(), [](const Gap& a, const Gap& b) {
    return gap_region(a) < gap_region(b);
  });
  return out;
}

// Follows a closing hard gap below the event time tolerance, halving it per
// step, so that removing the vanished piece leaves almost no L1 defect.
void creep(EvolutionState& s, const Gap& target, double limiter) {
  double scale = 1.0;
  if (target.kind == GapKind::Width) {
    scale = std::max(scale, s.upper(target.index));
  } else {
    scale = std::max({scale, std::abs(s.region_value(target.index, s.radii[target.index])),
                      std::abs(s.region_value(target.index + 1, s.radii[target.index]))});
  }
  for (int it = 0; it < 200; ++it) {
    if (s.regions[target.index].bend || (target.kind == GapKind::Jump && s.regions[target.index + 1].bend)) return;
    const auto orient = orientation(s);
    Rates rt;
    try {
      rt = compute_rates(s);
    } catch (const StepInvalid&) {
      return;
    } catch (const Error&) {
      return;
    }
    const std::vector<Gap> gaps = compute_gaps(s, orient, &rt);
    const Gap* g = nullptr;
    for (const Gap& x : gaps) {
      if (x.kind == target.kind && x.index == target.index) g = &x;
    }
    if (!g || g->value <= 1e-15 * scale || !(g->rate < 0.0)) return;
    double h = 0.5 * g->value / -g->rate;
    for (const Gap& x : gaps) {
      if (&x != g && !x.soft && x.rate < 0.0 && x.value > 0.0) h = std::min(h, limiter * x.value / -x.rate);
    }
    std::optional<EvolutionState> cand;
    for (int tries = 0; tries < 60 && h > 0.0 && !cand; ++tries, h *= 0.5) cand = try_step(s, h, orient);
    if (!cand) return;
    s = commit(s, std::move(*cand));
  }
}

}  // namespace

EvolutionState step(const EvolutionState& state, double dt) {
  if (!(dt > 0.0)) throw domain_error("step: dt must be positive");
  const auto orient = orientation(state);
  auto next = try_step(state, dt, orient);
  if (!next) {
    throw Error(ErrorKind::Integration, "step left the admissible configuration space; " + describe(state));
  }
  return commit(state, std::move(*next));
}

FacetSpeeds facet_speeds(const Stack& stack) {
  if (stack.dim().planar()) throw domain_error("facet_speeds: n = 2 stacks bend; use evolve_n2");
  const EvolutionState s = EvolutionState::from_stack(stack);
  Rates rt;
  try {
    rt = compute_rates(s);
  } catch (const StepInvalid&) {
    throw domain_error("facet_speeds: degenerate stack");
  }
  FacetSpeeds out;
  out.lambdas = rt.value;
  for (std::size_t k = 0; k + 1 < s.regions.size(); ++k) out.jumps.push_back(rt.zpp_hi[k] - rt.zpp_lo[k + 1]);
  return out;
}

Trajectory evolve(const Stack& stack, double t_end, const EvolveOptions& opts) {
  if (stack.dim().planar()) throw domain_error("evolve: n = 2 stacks require evolve_n2");
  return evolve_state(EvolutionState::from_stack(stack), t_end, opts);
}

Trajectory evolve_state(EvolutionState s, double t_end, const EvolveOptions& opts) {
  if (!(t_end > s.t)) throw domain_error("evolve: t_end must exceed the start time");
  if (s.dim.planar()) apply_planar_layout(s);
  const double span = t_end - s.t;
  const double dt = opts.dt > 0.0 ? opts.dt : span / 1e4;
  const double tol = opts.event_tol > 0.0 ? opts.event_tol : 1e-10 * t_end;
  const std::size_t max_events =
      opts.max_events > 0 ? opts.max_events : std::max<std::size_t>(10, 10 * s.radii.size());

  std::vector<double> outs = opts.output_times;
  for (double o : outs) {
    if (o < s.t - tol || o > t_end + tol) throw domain_error("evolve: output time outside the integration span");
  }
  std::vector<std::size_t> order(outs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return outs[a] < outs[b]; });

  Trajectory tr;
  tr.outputs.resize(outs.size());
  std::size_t next_out = 0;
  auto emit_outputs = [&]() {
    while (next_out < order.size() && outs[order[next_out]] <= s.t + tol) {
      tr.outputs[order[next_out]] = s;
      ++next_out;
    }
  };
  auto record = [&]() {
    if (opts.record_steps) tr.steps.push_back(make_record(s));
  };

  record();
  emit_outputs();
  std::size_t steps = 0;
  while (s.t < t_end - tol) {
    if (++steps > opts.max_steps) {
      throw Error(ErrorKind::Runaway, "evolve: step budget exhausted; " + describe(s));
    }
    if (s.regions.size() == 1) {
      // nothing left to move
      s.t = next_out < order.size() ? std::min(t_end, outs[order[next_out]]) : t_end;
      record();
      emit_outputs();
      continue;
    }

    Rates rt;
    try {
      rt = compute_rates(s);
    } catch (const StepInvalid&) {
      throw Error(ErrorKind::Integration, "evolve: speeds undefined; " + describe(s));
    }
    const auto orient = orientation(s);
    std::vector<Gap> gaps = compute_gaps(s, orient, &rt);

    std::vector<Gap> now = hits(gaps, tol);
    if (!now.empty()) {
      if (!now.front().soft) creep(s, now.front(), opts.limiter);
      tr.events.push_back(handle_event(s, now.front()));
      if (tr.events.size() > max_events) {
        throw Error(ErrorKind::Runaway, "evolve: event budget exhausted; " + describe(s));
      }
      if (s.regions.size() == 1 && !s.dim.planar()) {
        s.regions[0].value = 0.0;
        TrajectoryEvent ext;
        ext.kind = EventKind::Extinction;
        ext.time = s.t;
        ext.after = s;
        tr.events.push_back(ext);
        tr.extinction_time = s.t;
      }
      record();
      continue;
    }

    double h = std::min(dt, t_end - s.t);
    bool lands_on_output = false;
    if (next_out < order.size() && outs[order[next_out]] - s.t < h) {
      h = outs[order[next_out]] - s.t;
      lands_on_output = true;
    }
    double h_lim = kInfinity;
    for (const Gap& g : gaps) {
      if (g.rate != 0.0 && g.value > 0.0) h_lim = std::min(h_lim, opts.limiter * g.value / std::abs(g.rate));
    }
    for (std::size_t i = 0; i < s.radii.size(); ++i) {
      if (rt.radius[i] != 0.0) h_lim = std::min(h_lim, opts.limiter * s.radii[i] / std::abs(rt.radius[i]));
    }
    if (h_lim < h) {
      h = std::max(h_lim, tol);
      lands_on_output = false;
    }

    auto cand = try_step(s, h, orient);
    if (cand && !soft_crossed(compute_gaps(*cand, orient, nullptr), *cand)) {
      if (lands_on_output) cand->t = outs[order[next_out]];
      s = commit(s, std::move(*cand));
      record();
      emit_outputs();
      continue;
    }

    // An event lies inside the step: bisect for its time.
    double lo = 0.0, hi = h;
    std::optional<EvolutionState> best;
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      auto c = try_step(s, mid, orient);
      if (c && !soft_crossed(compute_gaps(*c, orient, nullptr), *c)) {
        lo = mid;
        best = std::move(c);
      } else {
        hi = mid;
      }
    }
    if (best) {
      s = commit(s, std::move(*best));
      record();
      emit_outputs();
    }
    auto past = try_step(s, std::max(hi - lo, tol), orient);
    if (past) {
      const auto past_gaps = compute_gaps(*past, orient, nullptr);
      if (soft_crossed(past_gaps, *past)) {
        s = commit(s, std::move(*past));
        const auto soft_hits = hits(compute_gaps(s, orient, nullptr), tol);
        for (const Gap& g : soft_hits) {
          if (g.soft) {
            tr.events.push_back(handle_event(s, g));
            break;
          }
        }
        record();
        continue;
      }
    }
    // Hard gap closing: take the one predicted to close first.
    Rates rt2;
    try {
      rt2 = compute_rates(s);
    } catch (const StepInvalid&) {
      throw Error(ErrorKind::Integration, "evolve: speeds undefined near an event; " + describe(s));
    }
    const auto near = compute_gaps(s, orientation(s), &rt2);
    const Gap* first = nullptr;
    double first_time = kInfinity;
    for (const Gap& g : near) {
      if (g.soft) continue;
      const double tt = g.value <= 0.0 ? 0.0 : (g.rate < 0.0 ? g.value / -g.rate : kInfinity);
      if (tt < first_time || (tt == first_time && first && gap_region(g) < gap_region(*first))) {
        first_time = tt;
        first = &g;
      }
    }
    if (!first || first_time > 1e3 * std::max(hi - lo, tol) + 1e-6 * span) {
      throw Error(ErrorKind::Integration, "evolve: step failure not attributable to an event; " + describe(s));
    }
    const Gap chosen = *first;
    creep(s, chosen, opts.limiter);
    tr.events.push_back(handle_event(s, chosen));
    if (tr.events.size() > max_events) {
      throw Error(ErrorKind::Runaway, "evolve: event budget exhausted; " + describe(s));
    }
    if (s.regions.size() == 1 && !s.dim.planar()) {
      s.regions[0].value = 0.0;
      TrajectoryEvent ext;
      ext.kind = EventKind::Extinction;
      ext.time = s.t;
      ext.after = s;
      tr.events.push_back(ext);
      tr.extinction_time = s.t;
    }
    record();
  }
  emit_outputs();
  tr.final_state = s;
  return tr;
}

MassEnergy mass_and_energy(const EvolutionState& s) {
  const int n = s.dim.value();
  const double omega = unit_ball_volume(n);
  const double area = unit_sphere_area(n);
  MassEnergy me;
  for (std::size_t k = 0; k < s.regions.size(); ++k) {
    const Region& reg = s.regions[k];
    const double lo = s.lower(k), hi = s.upper(k);
    if (reg.bend) {
      me.mass += bend_mass(reg.profile, lo, hi, s.t);
      me.tv += bend_variation(reg.profile, lo, hi, s.t);
    } else if (reg.value != 0.0) {
      me.mass += reg.value * omega * (std::pow(hi, n) - std::pow(lo, n));
    }
  }
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    if (s.kinds[i] != InterfaceKind::Jump) continue;
    const double r = s.radii[i];
    me.tv += std::abs(s.region_value(i, r) - s.region_value(i + 1, r)) * area * std::pow(r, n - 1.0);
  }
  return me;
}

double l1_distance(const EvolutionState& a, const EvolutionState& b) {
  const int n = a.dim.value();
  const double area = unit_sphere_area(n);
  std::vector<double> cuts{0.0};
  cuts.insert(cuts.end(), a.radii.begin(), a.radii.end());
  cuts.insert(cuts.end(), b.radii.begin(), b.radii.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto region_of = [](const EvolutionState& s, double r) {
    return static_cast<std::size_t>(std::upper_bound(s.radii.begin(), s.radii.end(), r) - s.radii.begin());
  };
  auto simpson = [&](double lo, double hi, std::size_t ka, std::size_t kb) {
    const int m = 64;
    const double h = (hi - lo) / m;
    double sum = 0.0;
    for (int j = 0; j <= m; ++j) {
      const double r = lo + j * h;
      const double w = (j == 0 || j == m) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      const double rr = std::max(r, 1e-300);
      sum += w * std::abs(a.region_value(ka, rr) - b.region_value(kb, rr)) * area * std::pow(r, n - 1.0);
    }
    return sum * h / 3.0;
  };

  double total = 0.0;
  for (std::size_t j = 0; j < cuts.size(); ++j) {
    const double lo = cuts[j];
    const double hi = j + 1 < cuts.size() ? cuts[j + 1] : kInfinity;
    const double probe = std::isfinite(hi) ? 0.5 * (lo + hi) : lo + 1.0;
    const std::size_t ka = region_of(a, probe), kb = region_of(b, probe);
    const Region& ra = a.regions[ka];
    const Region& rb = b.regions[kb];
    if (!ra.bend && !rb.bend) {
      const double diff = std::abs(ra.value - rb.value);
      if (diff == 0.0) continue;
      if (!std::isfinite(hi)) return kInfinity;
      total += diff * area / n * (std::pow(hi, n) - std::pow(lo, n));
      continue;
    }
    if (std::isfinite(hi)) {
      if (lo == 0.0) {
        total += simpson(lo, hi, ka, kb);
      } else {
        const auto g = geometric_grid(lo, hi, 9);
        for (std::size_t q = 1; q < g.size(); ++q) total += simpson(g[q - 1], g[q], ka, kb);
      }
    } else {
      // bending tails decay like r^-3; integrate far enough for 1e-6 relative
      const auto g = geometric_grid(lo, 1e4 * std::max(lo, 1.0), 33);
      for (std::size_t q = 1; q < g.size(); ++q) total += simpson(g[q - 1], g[q], ka, kb);
    }
  }
  return total;
}

}  // namespace tvflow
