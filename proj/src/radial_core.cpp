#include "tvflow/radial_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/Polynomials>

#include "tvflow/errors.hpp"

namespace tvflow {

Dimension::Dimension(int n) : n_(n) {
  if (n < 1) throw domain_error("dimension must be >= 1, got " + std::to_string(n));
}

RadialProfile::RadialProfile(Dimension dim, std::array<double, 4> coefficients,
                             Interval domain)
    : dim_(dim), c_(coefficients), domain_(domain) {
  if (!(domain.lo >= 0.0) || !(domain.lo < domain.hi)) {
    throw domain_error("profile domain must satisfy 0 <= lo < hi");
  }
}

double RadialProfile::lambda() const noexcept {
  const int n = dim_.value();
  return -2.0 * n * (n + 2) * c_[0];
}

RadialProfile RadialProfile::negated() const {
  return RadialProfile(dim_, {-c_[0], -c_[1], -c_[2], -c_[3]}, domain_);
}

namespace {

// Value and first three derivatives of one basis function.
struct Jet {
  double v, d1, d2, d3;
};

Jet power_jet(double p, double r) {
  const double v = std::pow(r, p);
  return {v, p * v / r, p * (p - 1.0) * v / (r * r),
          p * (p - 1.0) * (p - 2.0) * v / (r * r * r)};
}

Jet rlogr_jet(double r) {
  const double l = std::log(r);
  return {r * l, l + 1.0, 1.0 / r, -1.0 / (r * r)};
}

std::array<Jet, 4> basis_jets(int n, double r) {
  if (n == 2) return {power_jet(3.0, r), rlogr_jet(r), power_jet(1.0, r), power_jet(-1.0, r)};
  return {power_jet(3.0, r), power_jet(3.0 - n, r), power_jet(1.0, r),
          power_jet(1.0 - n, r)};
}

// k-th derivative of a basis function is r^(p-k) (a[k] log r + b[k]).
struct SymbolicJet {
  double p;
  double a[4];
  double b[4];
};

SymbolicJet power_symbolic(double p) {
  return {p, {0.0, 0.0, 0.0, 0.0}, {1.0, p, p * (p - 1.0), p * (p - 1.0) * (p - 2.0)}};
}

std::array<SymbolicJet, 4> symbolic_jets(int n) {
  if (n == 2) {
    const SymbolicJet rlogr{1.0, {1.0, 1.0, 0.0, 0.0}, {0.0, 1.0, 1.0, -1.0}};
    return {power_symbolic(3.0), rlogr, power_symbolic(1.0), power_symbolic(-1.0)};
  }
  return {power_symbolic(3.0), power_symbolic(3.0 - n), power_symbolic(1.0), power_symbolic(1.0 - n)};
}

// Exponent governing each basis function at 0 and infinity (r log r counts
// as exponent 1; its logarithm only matters for growth at infinity).
std::array<double, 4> basis_exponents(int n) {
  if (n == 2) return {3.0, 1.0, 1.0, -1.0};
  return {3.0, 3.0 - n, 1.0, 1.0 - n};
}

bool singular_at_origin(const RadialProfile& p) {
  const auto& c = p.coefficients();
  const auto e = basis_exponents(p.dim().value());
  for (int i = 0; i < 4; ++i) {
    if (e[i] < 0.0 && c[i] != 0.0) return true;
  }
  return false;
}

// Limits of z at 0 (regular profiles) and at infinity (bounded profiles).
double limit_at_origin(const RadialProfile& p) {
  const auto& c = p.coefficients();
  const auto e = basis_exponents(p.dim().value());
  double v = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (e[i] == 0.0) v += c[i];
  }
  return v;
}

double limit_at_infinity(const RadialProfile& p) { return limit_at_origin(p); }

// Terms that grow without bound as r -> inf, judged relative to the size of
// the profile at the reference radius.
bool grows_at_infinity(const RadialProfile& p, double ref) {
  const auto& c = p.coefficients();
  const auto e = basis_exponents(p.dim().value());
  double scale = 0.0;
  for (int i = 0; i < 4; ++i) scale = std::max(scale, std::abs(c[i]) * std::pow(ref, e[i]));
  for (int i = 0; i < 4; ++i) {
    if (e[i] > 0.0 && std::abs(c[i]) * std::pow(ref, e[i]) > 1e-13 * scale) return true;
  }
  return false;
}

bool in_domain(const Interval& d, double r) {
  const double slack = 1e-12 * std::max(1.0, std::abs(r));
  return r >= d.lo - slack && r <= d.hi + slack;
}

// Positive real roots of sum_k a[k] x^k, computed on x = s*y for conditioning.
std::vector<double> positive_roots(std::vector<double> a, double s) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] *= std::pow(s, static_cast<double>(k));
  double amax = 0.0;
  for (double v : a) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) return {};
  for (double& v : a) {
    v /= amax;
    if (std::abs(v) < 1e-15) v = 0.0;
  }
  while (!a.empty() && a.back() == 0.0) a.pop_back();
  // factor out the root at zero
  std::size_t lead_zeros = 0;
  while (lead_zeros < a.size() && a[lead_zeros] == 0.0) ++lead_zeros;
  a.erase(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(lead_zeros));
  if (a.size() < 2) return {};

  Eigen::VectorXd coeffs(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) coeffs[static_cast<Eigen::Index>(k)] = a[k];
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
  solver.compute(coeffs);
  std::vector<double> out;
  for (const auto& root : solver.roots()) {
    if (std::abs(root.imag()) <= 1e-7 * std::max(1.0, std::abs(root.real())) &&
        root.real() > 0.0) {
      out.push_back(root.real() * s);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double domain_scale(const Interval& d) {
  if (std::isfinite(d.hi)) return d.hi;
  return std::max(d.lo, 1.0);
}

// Bisection refinement of a sign change of f on [a, b].
template <typename F>
double refine_bracket(F&& f, double a, double b) {
  double fa = f(a);
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

double z_prime(const RadialProfile& p, double r) {
  const auto jets = basis_jets(p.dim().value(), r);
  const auto& c = p.coefficients();
  double v = 0.0;
  for (int i = 0; i < 4; ++i) v += c[i] * jets[i].d1;
  return v;
}

// [0, inf) has no length scale of its own; sample around r = 1
double sampling_lo(const Interval& d) {
  if (d.lo > 0.0) return d.lo;
  return std::isfinite(d.hi) ? 1e-9 * d.hi : 1e-6;
}
double sampling_hi(const Interval& d) {
  if (std::isfinite(d.hi)) return d.hi;
  return d.lo > 0.0 ? 1e3 * d.lo : 1e6;
}

void dedupe(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(),
                      [](double x, double y) { return std::abs(x - y) <= 1e-10 * std::max(1.0, y); }),
          v.end());
}

}  // namespace

double RadialProfile::z(double r) const noexcept {
  const auto jets = basis_jets(dim_.value(), r);
  return c_[0] * jets[0].v + c_[1] * jets[1].v + c_[2] * jets[2].v + c_[3] * jets[3].v;
}

FieldSample eval(const RadialProfile& profile, double r) {
  if (!(r >= 0.0)) throw domain_error("eval: radius must be non-negative");
  const int n = profile.dim().value();
  const auto& c = profile.coefficients();
  if (r == 0.0) {
    if (c[1] != 0.0 || c[3] != 0.0) {
      throw Error(ErrorKind::Singularity, "eval: r = 0 with singular basis terms (c1 or c3 nonzero)");
    }
    if (!in_domain(profile.domain(), r)) throw domain_error("eval: r = 0 outside profile domain");
    // z = c0 r^3 + c2 r near the origin
    FieldSample s;
    s.z_prime = c[2];
    s.z_third = 6.0 * c[0];
    s.div_value = n * c[2];
    return s;
  }
  if (!in_domain(profile.domain(), r)) throw domain_error("eval: radius outside profile domain");

  const auto jets = basis_jets(n, r);
  FieldSample s;
  s.r = r;
  for (int i = 0; i < 4; ++i) {
    s.z += c[i] * jets[i].v;
    s.z_prime += c[i] * jets[i].d1;
    s.z_second += c[i] * jets[i].d2;
    s.z_third += c[i] * jets[i].d3;
  }
  s.div_value = s.z_prime + (n - 1) * s.z / r;
  s.grad_div_value = s.z_second + (n - 1) * (s.z_prime / r - s.z / (r * r));
  return s;
}

double ode_residual(const RadialProfile& profile, double r) {
  if (!(r > 0.0)) throw domain_error("ode_residual: radius must be positive");
  const int n = profile.dim().value();
  const auto& c = profile.coefficients();
  const auto sym = symbolic_jets(n);
  const double m = n - 1.0;
  const double L = std::log(r);
  // The operator is applied to the (log, constant) coefficient pairs of each
  // monomial, so the result is c_i times one power of r.
  double lhs = 0.0;
  for (int i = 0; i < 4; ++i) {
    const SymbolicJet& j = sym[i];
    const double f1a = j.a[2] + m * (j.a[1] - j.a[0]);
    const double f1b = j.b[2] + m * (j.b[1] - j.b[0]);
    const double f2a = j.a[3] + m * (j.a[2] - 2.0 * j.a[1] + 2.0 * j.a[0]);
    const double f2b = j.b[3] + m * (j.b[2] - 2.0 * j.b[1] + 2.0 * j.b[0]);
    const double opa = -(f2a + m * f1a), opb = -(f2b + m * f1b);
    if (opa == 0.0 && opb == 0.0) continue;
    lhs += c[i] * (opa * L + opb) * std::pow(r, j.p - 3.0);
  }
  return lhs - profile.lambda();
}

std::vector<double> stationary_points(const RadialProfile& profile) {
  const int n = profile.dim().value();
  const auto& c = profile.coefficients();
  const Interval d = profile.domain();
  std::vector<double> roots;

  if (n != 2) {
    // r^n z'(r) = 3c0 r^(n+2) + (3-n) c1 r^2 + c2 r^n + (1-n) c3
    std::vector<double> poly(static_cast<std::size_t>(n + 3), 0.0);
    poly[static_cast<std::size_t>(n + 2)] += 3.0 * c[0];
    poly[2] += (3.0 - n) * c[1];
    poly[static_cast<std::size_t>(n)] += c[2];
    poly[0] += (1.0 - n) * c[3];
    for (double r : positive_roots(poly, domain_scale(d))) {
      // Newton polish on z'
      for (int it = 0; it < 4; ++it) {
        const FieldSample s = eval(RadialProfile(profile.dim(), c, Interval{0.0, kInfinity}), r);
        if (s.z_second == 0.0) break;
        const double step = s.z_prime / s.z_second;
        if (!std::isfinite(step) || std::abs(step) > 0.1 * r) break;
        r -= step;
      }
      roots.push_back(r);
    }
  }

  // Sign changes of z' on a dense grid catch everything for n = 2 and
  // double-check the polynomial roots otherwise.
  const auto grid = geometric_grid(sampling_lo(d), sampling_hi(d), 4096);
  auto zp = [&](double r) { return z_prime(profile, r); };
  double prev = zp(grid.front());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = zp(grid[i]);
    if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
      roots.push_back(refine_bracket(zp, grid[i - 1], grid[i]));
    }
    prev = cur;
  }

  std::vector<double> inside;
  for (double r : roots) {
    if (r > d.lo && r < d.hi && std::isfinite(r)) inside.push_back(r);
  }
  dedupe(inside);
  return inside;
}

std::vector<double> inflection_points(const RadialProfile& profile) {
  const int n = profile.dim().value();
  const auto& c = profile.coefficients();
  const Interval d = profile.domain();
  std::vector<double> w;
  if (n == 2) {
    w = {2.0 * c[3], 0.0, c[1], 0.0, 6.0 * c[0]};
  } else {
    w.assign(static_cast<std::size_t>(n + 3), 0.0);
    w[static_cast<std::size_t>(n + 2)] += 6.0 * c[0];
    w[2] += (n - 3.0) * (n - 2.0) * c[1];
    w[0] += n * (n - 1.0) * c[3];
  }
  auto w_at = [&](double r) {
    double v = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) v += w[k] * std::pow(r, static_cast<double>(k));
    return v;
  };
  std::vector<double> out;
  for (double r : positive_roots(w, domain_scale(d))) {
    if (!(r > d.lo && r < d.hi)) continue;
    const double left = w_at(r * (1.0 - 1e-6));
    const double right = w_at(r * (1.0 + 1e-6));
    if ((left < 0.0) != (right < 0.0)) out.push_back(r);
  }
  dedupe(out);
  return out;
}

SupResult sup_abs_z(const RadialProfile& profile, std::size_t samples) {
  const Interval d = profile.domain();
  if (d.lo == 0.0 && singular_at_origin(profile)) return {kInfinity, 0.0};
  if (!std::isfinite(d.hi) && grows_at_infinity(profile, std::max(d.lo, 1.0))) {
    return {kInfinity, kInfinity};
  }

  SupResult best{-1.0, 0.0};
  auto consider = [&](double r, double value) {
    const double a = std::abs(value);
    if (a > best.sup) best = {a, r};
  };

  if (d.lo == 0.0) {
    consider(0.0, limit_at_origin(profile));
  } else {
    consider(d.lo, profile.z(d.lo));
  }
  if (std::isfinite(d.hi)) {
    consider(d.hi, profile.z(d.hi));
  } else {
    consider(kInfinity, limit_at_infinity(profile));
  }
  for (double r : geometric_grid(sampling_lo(d), sampling_hi(d), std::max<std::size_t>(samples, 2))) {
    consider(r, profile.z(r));
  }
  for (double r : stationary_points(profile)) consider(r, profile.z(r));
  return best;
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) {
    throw domain_error("geometric_grid: need 0 < lo < hi and count >= 2");
  }
  std::vector<double> g(count);
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.front() = lo;
  g.back() = hi;
  return g;
}

double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

double unit_sphere_area(int n) { return n * unit_ball_volume(n); }

}  // namespace tvflow
