#include "tvflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tvflow/errors.hpp"

namespace tvflow::oracle {

namespace {

double sphere_area(int n) {
  return n * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

// Antiderivative of r^m (log r)^q, by parts on q. Vanishes at r = 0 when
// m > -1 and at r = inf when m < -1.
double antiderivative(double m, int q, double r) {
  if (std::isinf(r)) return 0.0;
  if (std::abs(m + 1.0) < 1e-14) return std::pow(std::log(r), q + 1) / (q + 1);
  if (r == 0.0) return 0.0;
  double v = std::pow(r, m + 1.0) * std::pow(std::log(r), q) / (m + 1.0);
  if (q > 0) v -= q / (m + 1.0) * antiderivative(m, q - 1, r);
  return v;
}

double simpson(const std::function<double(double)>& g, double a, double b, double fa, double fm,
               double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = g(lm), frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& g, double a, double b, double tol) {
  // split first so that the initial estimate is not fooled by symmetry
  const int pieces = 16;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + (b - a) * i / pieces;
    const double hi = a + (b - a) * (i + 1) / pieces;
    const double fa = g(lo), fb = g(hi), fm = g(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson(g, lo, hi, fa, fm, fb, whole, tol / pieces, 50);
  }
  return total;
}

// Derivative on a non-uniform grid at interior index i.
using Wide = long double;

Wide centred(const std::vector<Wide>& x, const std::vector<Wide>& f, std::size_t i) {
  const Wide hm = x[i] - x[i - 1];
  const Wide hp = x[i + 1] - x[i];
  return (hm * hm * f[i + 1] - hp * hp * f[i - 1] + (hp * hp - hm * hm) * f[i]) /
         (hm * hp * (hm + hp));
}

// Differentiate (x, f) at interior points, returning the shortened pair.
void diff_inner(std::vector<Wide>& x, std::vector<Wide>& f) {
  std::vector<Wide> nx, nf;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    nx.push_back(x[i]);
    nf.push_back(centred(x, f, i));
  }
  x = std::move(nx);
  f = std::move(nf);
}

}  // namespace

Expr simplify(Expr e) {
  std::sort(e.begin(), e.end(), [](const Term& a, const Term& b) {
    return a.power != b.power ? a.power < b.power : a.log_power < b.log_power;
  });
  Expr out;
  for (const Term& t : e) {
    if (!out.empty() && out.back().power == t.power && out.back().log_power == t.log_power) {
      out.back().coef += t.coef;
    } else {
      out.push_back(t);
    }
  }
  std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
  return out;
}

Expr differentiate(const Expr& e) {
  Expr out;
  for (const Term& t : e) {
    if (t.power != 0.0) out.push_back({t.coef * t.power, t.power - 1.0, t.log_power});
    if (t.log_power > 0) out.push_back({t.coef * t.log_power, t.power - 1.0, t.log_power - 1});
  }
  return simplify(out);
}

Expr multiply_power(const Expr& e, double k) {
  Expr out = e;
  for (Term& t : out) t.power += k;
  return out;
}

Expr scale(const Expr& e, double s) {
  Expr out = e;
  for (Term& t : out) t.coef *= s;
  return simplify(out);
}

Expr add(const Expr& a, const Expr& b) {
  Expr out = a;
  out.insert(out.end(), b.begin(), b.end());
  return simplify(out);
}

double evaluate(const Expr& e, double r) {
  double v = 0.0;
  for (const Term& t : e) {
    double term = t.coef * std::pow(r, t.power);
    if (t.log_power > 0) term *= std::pow(std::log(r), t.log_power);
    v += term;
  }
  return v;
}

Expr apply_operator(int n, const Expr& z) {
  Expr e = multiply_power(z, n - 1.0);
  e = differentiate(e);
  e = multiply_power(e, 1.0 - n);
  e = differentiate(e);
  e = multiply_power(e, n - 1.0);
  e = differentiate(e);
  e = multiply_power(e, 1.0 - n);
  return scale(e, -1.0);
}

Expr basis_function(int n, int i) {
  if (i < 0 || i > 3) throw domain_error("oracle: basis index out of range");
  // r^(n-1) z must be annihilated by the inner operators: z in
  // {r^3, r^(3-n), r, r^(1-n)}, with r^(3-n) -> r log r when it collides
  // with r (n = 2).
  switch (i) {
    case 0: return {{1.0, 3.0, 0}};
    case 1: return n == 2 ? Expr{{1.0, 1.0, 1}} : Expr{{1.0, 3.0 - n, 0}};
    case 2: return {{1.0, 1.0, 0}};
    default: return {{1.0, 1.0 - n, 0}};
  }
}

double lambda_of(int n, const std::array<double, 4>& c) {
  Expr z;
  for (int i = 0; i < 4; ++i) z = add(z, scale(basis_function(n, i), c[i]));
  const Expr l = apply_operator(n, z);
  double constant = 0.0;
  double stray = 0.0;
  for (const Term& t : l) {
    if (t.power == 0.0 && t.log_power == 0) {
      constant += t.coef;
    } else {
      stray = std::max(stray, std::abs(t.coef));
    }
  }
  if (stray > 1e-9 * std::max(1.0, std::abs(constant))) {
    throw Error(ErrorKind::Internal, "oracle: basis does not solve the ODE");
  }
  return constant;
}

LinearSystem4 assemble(int n, double R0, double R1, const BoundaryData& bc) {
  LinearSystem4 sys;
  for (int i = 0; i < 4; ++i) {
    const Expr b = basis_function(n, i);
    const Expr db = differentiate(b);
    sys.m[0][i] = evaluate(b, R0);
    sys.m[1][i] = evaluate(db, R0);
    sys.m[2][i] = evaluate(b, R1);
    sys.m[3][i] = evaluate(db, R1);
  }
  sys.rhs = {bc.z_inner, bc.dz_inner, bc.z_outer, bc.dz_outer};
  return sys;
}

std::array<double, 4> gauss_solve(LinearSystem4 sys) {
  auto& a = sys.m;
  auto& b = sys.rhs;
  // column scaling keeps widely different basis magnitudes comparable
  std::array<double, 4> col{};
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) col[j] = std::max(col[j], std::abs(a[i][j]));
    if (col[j] == 0.0) throw Error(ErrorKind::Internal, "oracle: zero column");
    for (int i = 0; i < 4; ++i) a[i][j] /= col[j];
  }
  for (int k = 0; k < 4; ++k) {
    int p = k;
    for (int i = k + 1; i < 4; ++i) {
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    }
    if (std::abs(a[p][k]) < 1e-14) throw Error(ErrorKind::Internal, "oracle: singular system");
    std::swap(a[p], a[k]);
    std::swap(b[p], b[k]);
    for (int i = k + 1; i < 4; ++i) {
      const double f = a[i][k] / a[k][k];
      for (int j = k; j < 4; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::array<double, 4> x{};
  for (int i = 3; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < 4; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  for (int j = 0; j < 4; ++j) x[j] /= col[j];
  return x;
}

BvpSolution bvp_solve(int n, double R0, double R1, const BoundaryData& bc) {
  if (!(R0 > 0.0) || !(R1 > R0) || !std::isfinite(R1)) {
    throw domain_error("oracle: need 0 < R0 < R1 < inf");
  }
  BvpSolution s;
  s.c = gauss_solve(assemble(n, R0, R1, bc));
  s.lambda = lambda_of(n, s.c);
  return s;
}

BvpSolution regular_solve(int n, double R, double z_R, double dz_R) {
  const Expr b0 = basis_function(n, 0), b2 = basis_function(n, 2);
  const double m00 = evaluate(b0, R), m01 = evaluate(b2, R);
  const double m10 = evaluate(differentiate(b0), R), m11 = evaluate(differentiate(b2), R);
  const double det = m00 * m11 - m01 * m10;
  if (det == 0.0) throw Error(ErrorKind::Internal, "oracle: singular regular system");
  BvpSolution s;
  s.c = {(z_R * m11 - m01 * dz_R) / det, 0.0, (m00 * dz_R - m10 * z_R) / det, 0.0};
  s.lambda = lambda_of(n, s.c);
  return s;
}

GridFunction sample(int n, const std::array<double, 4>& c, const std::vector<double>& r) {
  GridFunction g;
  g.r = r;
  for (double x : r) {
    const Wide xw = x;
    Wide v = 0;
    for (int i = 0; i < 4; ++i) {
      for (const Term& t : basis_function(n, i)) {
        v += static_cast<Wide>(c[i]) * t.coef * std::pow(xw, static_cast<Wide>(t.power)) *
             std::pow(std::log(xw), t.log_power);
      }
    }
    g.v.push_back(v);
  }
  return g;
}

double fd_ode_residual(const GridFunction& z, int n, double lambda) {
  if (z.r.size() < 7 || z.r.size() != z.v.size()) {
    throw domain_error("oracle: fd residual needs at least 7 matching samples");
  }
  for (std::size_t i = 1; i < z.r.size(); ++i) {
    if (!(z.r[i] > z.r[i - 1])) throw domain_error("oracle: grid must be strictly increasing");
  }
  // third differences amplify rounding like eps / h^3, hence the wide type
  std::vector<Wide> x(z.r.begin(), z.r.end()), f(z.v.size());
  const Wide p = n - 1;
  for (std::size_t i = 0; i < x.size(); ++i) f[i] = std::pow(x[i], p) * z.v[i];
  diff_inner(x, f);
  for (std::size_t i = 0; i < x.size(); ++i) f[i] *= std::pow(x[i], -p);
  diff_inner(x, f);
  for (std::size_t i = 0; i < x.size(); ++i) f[i] *= std::pow(x[i], p);
  diff_inner(x, f);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, static_cast<double>(std::abs(-std::pow(x[i], -p) * f[i] - lambda)));
  }
  return worst;
}

Trajectory rk4(const VectorField& f, State y0, double t0, double t1, double dt) {
  if (!(dt > 0.0)) throw domain_error("oracle: rk4 needs dt > 0");
  Trajectory tr;
  double t = t0;
  State y = std::move(y0);
  tr.t.push_back(t);
  tr.y.push_back(y);
  auto axpy = [](const State& a, double h, const State& b) {
    State out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + h * b[i];
    return out;
  };
  const auto steps = static_cast<long long>(std::ceil((t1 - t0) / dt - 1e-9));
  for (long long s = 0; s < steps; ++s) {
    const double h = std::min(dt, t1 - t);
    const State k1 = f(t, y);
    const State k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
    const State k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
    const State k4 = f(t + h, axpy(y, h, k3));
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(y[i])) {
        throw Error(ErrorKind::Integration, "oracle: rk4 produced a non-finite value at t = " +
                                                std::to_string(t + h));
      }
    }
    t = (s + 1 == steps) ? t1 : t + h;
    tr.t.push_back(t);
    tr.y.push_back(y);
  }
  return tr;
}

double radial_integral(const std::function<double(double)>& f, int n, double R0, double R1,
                       double tol) {
  if (!(R0 >= 0.0) || !(R1 > R0)) throw domain_error("oracle: need 0 <= R0 < R1");
  const double area = sphere_area(n);
  if (std::isfinite(R1)) {
    auto g = [&](double r) { return r == 0.0 && n > 1 ? 0.0 : f(r) * area * std::pow(r, n - 1.0); };
    return adaptive_simpson(g, R0, R1, tol);
  }
  if (R0 == 0.0) throw domain_error("oracle: the whole line is not supported");
  auto g = [&](double u) {
    if (u == 0.0) return 0.0;
    const double r = R0 / u;
    return f(r) * area * std::pow(r, n - 1.0) * R0 / (u * u);
  };
  const double near = std::abs(g(1e-6)), far = std::abs(g(1e-3));
  if (!std::isfinite(near) || (near > 1e-3 && near >= far)) {
    throw domain_error("oracle: integrand does not decay; divergent integral");
  }
  return adaptive_simpson(g, 0.0, 1.0, tol);
}

double radial_integral(const Expr& f, int n, double R0, double R1) {
  if (!(R0 >= 0.0) || !(R1 > R0)) throw domain_error("oracle: need 0 <= R0 < R1");
  const double area = sphere_area(n);
  double total = 0.0;
  for (const Term& t : f) {
    const double m = t.power + n - 1.0;
    if (!std::isfinite(R1) && m >= -1.0) throw domain_error("oracle: divergent integral at infinity");
    if (R0 == 0.0 && m <= -1.0) throw domain_error("oracle: divergent integral at the origin");
    total += t.coef * (antiderivative(m, t.log_power, R1) - antiderivative(m, t.log_power, R0));
  }
  return total * area;
}

}  // namespace tvflow::oracle
