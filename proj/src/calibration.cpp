#include "tvflow/calibration.hpp"

#include <cmath>
#include <mutex>
#include <quadmath.h>
#include <string>

#include <Eigen/Dense>

#include "tvflow/errors.hpp"
#include "tvflow/numerics.hpp"

namespace tvflow {

GeneralizedAnnulus::GeneralizedAnnulus(Dimension dim, double inner, double outer)
    : dim_(dim), inner_(inner), outer_(outer) {
  if (!(inner >= 0.0) || !(outer > inner) || std::isnan(outer)) {
    throw domain_error("generalized annulus needs 0 <= inner < outer");
  }
}

DomainKind GeneralizedAnnulus::kind() const noexcept {
  const bool finite_outer = std::isfinite(outer_);
  if (inner_ == 0.0) return finite_outer ? DomainKind::Ball : DomainKind::WholeSpace;
  return finite_outer ? DomainKind::Annulus : DomainKind::ComplementOfBall;
}

bool GeneralizedAnnulus::bounded() const noexcept { return std::isfinite(outer_); }

namespace {

void check_chi(int chi, const char* where) {
  if (chi != 1 && chi != -1) {
    throw domain_error(std::string(where) + ": signature values must be +1 or -1");
  }
}

void check_radius(double r, const char* where) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw domain_error(std::string(where) + ": radius must be positive and finite");
  }
}

// Basis values and first derivatives at rho, for the row assembly.
void basis_rows(int n, double rho, double* v, double* d) {
  if (n == 2) {
    const double l = std::log(rho);
    v[0] = rho * rho * rho; d[0] = 3.0 * rho * rho;
    v[1] = rho * l;         d[1] = l + 1.0;
    v[2] = rho;             d[2] = 1.0;
    v[3] = 1.0 / rho;       d[3] = -1.0 / (rho * rho);
    return;
  }
  const double p[4] = {3.0, 3.0 - n, 1.0, 1.0 - n};
  for (int i = 0; i < 4; ++i) {
    v[i] = std::pow(rho, p[i]);
    d[i] = p[i] * std::pow(rho, p[i] - 1.0);
  }
}

bool admissible_sup(double sup) { return sup <= 1.0 + kUnitBoundTolerance; }

Admissibility annulus_admissibility(const RadialProfile& profile, int chi_inner, int chi_outer) {
  const Interval d = profile.domain();
  const FieldSample in = eval(profile, d.lo);
  const FieldSample out = eval(profile, d.hi);
  Admissibility adm;
  const SupResult s = sup_abs_z(profile);
  adm.sup_abs_z = s.sup;
  adm.argmax = s.argmax;
  adm.bc_residuals = {in.z + chi_inner, d.lo * in.z_prime, out.z - chi_outer, d.hi * out.z_prime};
  return adm;
}

}  // namespace

std::array<double, 4> ball_coefficients(Dimension, double radius, int chi) {
  check_radius(radius, "ball");
  check_chi(chi, "ball");
  // chi = -1: z = (r/R)^3 / 2 - 3 (r/R) / 2
  const double s = -chi;
  return {s * 0.5 / (radius * radius * radius), 0.0, s * -1.5 / radius, 0.0};
}

std::array<double, 4> complement_coefficients(Dimension dim, double radius, int chi) {
  check_radius(radius, "complement");
  check_chi(chi, "complement");
  const int n = dim.value();
  if (n == 2) throw Error(ErrorKind::Unsupported, "complement: no bounded calibration for n = 2");
  // chi = +1: z = -((n-1)/2)(r/R)^(3-n) + ((n-3)/2)(r/R)^(1-n)
  const double s = chi;
  return {0.0, s * -0.5 * (n - 1) * std::pow(radius, n - 3.0), 0.0,
          s * 0.5 * (n - 3) * std::pow(radius, n - 1.0)};
}

namespace {

using Quad = __float128;

template <class T>
T power(T x, int p) {
  T out = 1;
  const T b = p < 0 ? T(1) / x : x;
  for (int i = 0; i < std::abs(p); ++i) out *= b;
  return out;
}

// Values, first and second derivatives of the basis at x, in quad precision.
void basis_rows_quad(int n, Quad x, Quad* v, Quad* d, Quad* dd) {
  if (n == 2) {
    const Quad l = logq(x);
    v[0] = x * x * x; d[0] = 3 * x * x; dd[0] = 6 * x;
    v[1] = x * l;     d[1] = l + 1;     dd[1] = 1 / x;
    v[2] = x;         d[2] = 1;         dd[2] = 0;
    v[3] = 1 / x;     d[3] = -1 / (x * x); dd[3] = 2 / (x * x * x);
    return;
  }
  const int p[4] = {3, 3 - n, 1, 1 - n};
  for (int i = 0; i < 4; ++i) {
    v[i] = power(x, p[i]);
    d[i] = p[i] * power(x, p[i] - 1);
    dd[i] = p[i] * (p[i] - 1) * power(x, p[i] - 2);
  }
}

// Thin annuli: the rows at both radii nearly coincide and double precision
// loses about (width / radius)^3 of the result.
AnnulusBoundary solve_quad(int n, double inner, double outer, int chi_inner, int chi_outer) {
  const Quad r1 = outer;
  const Quad rho = Quad(inner) / r1;
  Quad m[4][5];
  Quad v[4], d[4], dd_in[4], dd_out[4];
  basis_rows_quad(n, rho, v, d, dd_in);
  for (int i = 0; i < 4; ++i) {
    m[0][i] = v[i];
    m[1][i] = d[i];
  }
  basis_rows_quad(n, Quad(1), v, d, dd_out);
  for (int i = 0; i < 4; ++i) {
    m[2][i] = v[i];
    m[3][i] = d[i];
  }
  m[0][4] = -chi_inner;
  m[1][4] = 0;
  m[2][4] = chi_outer;
  m[3][4] = 0;
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int row = col + 1; row < 4; ++row) {
      if (fabsq(m[row][col]) > fabsq(m[piv][col])) piv = row;
    }
    if (m[piv][col] == 0) throw Error(ErrorKind::Internal, "annulus: singular system");
    for (int j = 0; j < 5; ++j) std::swap(m[col][j], m[piv][j]);
    for (int row = col + 1; row < 4; ++row) {
      const Quad f = m[row][col] / m[col][col];
      for (int j = col; j < 5; ++j) m[row][j] -= f * m[col][j];
    }
  }
  Quad h[4];
  for (int row = 3; row >= 0; --row) {
    Quad acc = m[row][4];
    for (int j = row + 1; j < 4; ++j) acc -= m[row][j] * h[j];
    h[row] = acc / m[row][row];
  }

  AnnulusBoundary out;
  Quad z2_in = 0, z2_out = 0;
  for (int i = 0; i < 4; ++i) {
    z2_in += h[i] * dd_in[i];
    z2_out += h[i] * dd_out[i];
  }
  out.z2_inner = static_cast<double>(z2_in / (r1 * r1));
  out.z2_outer = static_cast<double>(z2_out / (r1 * r1));
  if (n == 2) {
    const Quad c1 = h[1] / r1;
    out.coefficients = {static_cast<double>(h[0] / (r1 * r1 * r1)), static_cast<double>(c1),
                        static_cast<double>(h[2] / r1 - c1 * logq(r1)), static_cast<double>(h[3] * r1)};
  } else {
    out.coefficients = {static_cast<double>(h[0] / (r1 * r1 * r1)), static_cast<double>(h[1] * power(r1, n - 3)),
                        static_cast<double>(h[2] / r1), static_cast<double>(h[3] * power(r1, n - 1))};
  }
  return out;
}

std::array<double, 4> solve_double(int n, double inner, double outer, int chi_inner, int chi_outer) {
  Eigen::Matrix4d m;
  Eigen::Vector4d rhs(-chi_inner, 0.0, chi_outer, 0.0);
  double v[4], d[4];
  basis_rows(n, inner / outer, v, d);
  for (int i = 0; i < 4; ++i) {
    m(0, i) = v[i];
    m(1, i) = d[i];
  }
  basis_rows(n, 1.0, v, d);
  for (int i = 0; i < 4; ++i) {
    m(2, i) = v[i];
    m(3, i) = d[i];
  }
  const Eigen::PartialPivLU<Eigen::Matrix4d> lu(m);
  if (!(std::abs(lu.determinant()) > 0.0)) throw Error(ErrorKind::Internal, "annulus: singular system");
  const Eigen::Vector4d h = lu.solve(rhs);
  if (!h.allFinite()) throw Error(ErrorKind::Internal, "annulus: non-finite solution");

  const double r1 = outer;
  if (n == 2) {
    const double c1 = h[1] / r1;
    return {h[0] / (r1 * r1 * r1), c1, h[2] / r1 - c1 * std::log(r1), h[3] * r1};
  }
  return {h[0] / (r1 * r1 * r1), h[1] * std::pow(r1, n - 3.0), h[2] / r1,
          h[3] * std::pow(r1, n - 1.0)};
}

}  // namespace

AnnulusBoundary annulus_boundary(Dimension dim, double inner, double outer, int chi_inner, int chi_outer) {
  check_radius(inner, "annulus");
  check_radius(outer, "annulus");
  check_chi(chi_inner, "annulus");
  check_chi(chi_outer, "annulus");
  if (!(inner < outer)) throw domain_error("annulus: need inner < outer");
  const int n = dim.value();
  if (n > kMaxAnnulusDimension) {
    throw Error(ErrorKind::Range, "annulus: dimension " + std::to_string(n) +
                                      " exceeds the supported maximum of " +
                                      std::to_string(kMaxAnnulusDimension));
  }

  AnnulusBoundary out;
  if (n == 1) {
    // cubic Hermite data on [m - h, m + h]; exact for thin intervals
    const double A = -chi_inner, B = chi_outer;
    const double mid = 0.5 * (inner + outer), h = 0.5 * (outer - inner);
    const double a3 = -(B - A) / 4.0, a1 = 3.0 * (B - A) / 4.0, a0 = (A + B) / 2.0;
    const double k = a3 / (h * h * h);
    out.coefficients = {k, -3.0 * k * mid, 3.0 * k * mid * mid + a1 / h,
                        -k * mid * mid * mid - a1 * mid / h + a0};
    out.z2_inner = -6.0 * a3 / (h * h);
    out.z2_outer = 6.0 * a3 / (h * h);
    return out;
  }
  if (outer - inner < kThinAnnulus * outer) return solve_quad(n, inner, outer, chi_inner, chi_outer);
  out.coefficients = solve_double(n, inner, outer, chi_inner, chi_outer);
  const RadialProfile profile(dim, out.coefficients, Interval{inner, outer});
  out.z2_inner = eval(profile, inner).z_second;
  out.z2_outer = eval(profile, outer).z_second;
  return out;
}

std::array<double, 4> annulus_coefficients(Dimension dim, double inner, double outer,
                                           int chi_inner, int chi_outer) {
  return annulus_boundary(dim, inner, outer, chi_inner, chi_outer).coefficients;
}

std::array<double, 4> annulus_closed_form_constant(Dimension dim, double inner, double outer) {
  const int n = dim.value();
  if (n == 2) throw Error(ErrorKind::Unsupported, "closed form: n = 2 uses the linear solve");
  const double q = outer / inner;
  const double qn = std::pow(q, n);
  const double den = 4.0 * (qn - 1.0) * (qn - 1.0) -
                     n * n * (q * q - 1.0) * (q * q - 1.0) * std::pow(q, n - 2.0);
  const double c0 = (2.0 * q * q * q * (std::pow(q, 2.0 * n - 3.0) - 1.0) +
                     (q - 1.0) * qn * ((n - 1.0) * (n - 2.0) * (q + 1.0) * (q + 1.0) - 2.0 * q)) /
                    den;
  const double c1 = (q + 1.0) *
                    (2.0 * (n - 1.0) * (std::pow(q, n + 2.0) - 1.0) +
                     (n + 2.0) * q * (q - 1.0) * (std::pow(q, n - 1.0) + 1.0)) /
                    den;
  const double c2 = -(6.0 * q * (std::pow(q, 2.0 * n - 1.0) - 1.0) +
                      (q - 1.0) * std::pow(q, n - 2.0) *
                          (6.0 * q * q + n * (n - 1.0) * (1.0 + q) * (1.0 + q * q * q))) /
                    den;
  const double c3 = -(q + 1.0) *
                    (2.0 * (n - 3.0) * (qn - 1.0) +
                     n * q * (q - 1.0) * (std::pow(q, n - 3.0) + 1.0)) /
                    den;
  return {c0 / (outer * outer * outer), c1 * std::pow(outer, n - 3.0), c2 / outer,
          c3 * std::pow(outer, n - 1.0)};
}

std::array<double, 4> annulus_closed_form_alternating(Dimension dim, double inner, double outer) {
  const int n = dim.value();
  if (n == 2) throw Error(ErrorKind::Unsupported, "closed form: n = 2 uses the linear solve");
  const double q = outer / inner;
  const double qn = std::pow(q, n);
  const double q2n = qn * qn;
  const double p = (1.0 - q * q) * (1.0 - q * q);
  const double c0 =
      (-2.0 * q * q * q - 2.0 * q2n +
       qn * (1.0 + q) *
           ((n - 2.0) * (n - 1.0) - 2.0 * ((n - 3.0) * n + 1.0) * q + (n - 2.0) * (n - 1.0) * q * q)) /
      (std::pow(q, n - 2.0) * (n * n * p + 8.0 * q * q) - 4.0 - 4.0 * q2n);
  const double c1 =
      -(-3.0 * n * q + 2.0 * (n - 1.0) + (n + 2.0) * q * q * q + (n + 2.0) * qn -
        3.0 * n * std::pow(q, n + 2.0) + 2.0 * (n - 1.0) * std::pow(q, n + 3.0)) /
      (4.0 * (1.0 - qn) * (1.0 - qn) - n * n * std::pow(q, n - 2.0) * p);
  const double nn1 = n * (n - 1.0);
  const double c2 =
      (6.0 * q * q * q + 6.0 * std::pow(q, 2.0 * n + 2.0) -
       qn * (1.0 + q) * (nn1 - nn1 * q - nn1 * q * q * q + nn1 * q * q * q * q + 6.0 * q * q)) /
      (qn * (n * n * p + 8.0 * q * q) - 4.0 * q * q - 4.0 * std::pow(q, 2.0 * n + 2.0));
  const double c3 =
      (1.0 - q) *
      (qn * (n * (1.0 - q) * (1.0 + 2.0 * q) + 6.0 * q * q) -
       q * q * (-2.0 * (n - 3.0) + n * q + n * q * q)) /
      (4.0 * q * q * (1.0 - qn) * (1.0 - qn) - n * n * qn * p);
  return {c0 / (outer * outer * outer), c1 * std::pow(outer, n - 3.0), c2 / outer,
          c3 * std::pow(outer, n - 1.0)};
}

Calibration solve_ball(Dimension dim, double radius, int chi) {
  const auto c = ball_coefficients(dim, radius, chi);
  RadialProfile profile(dim, c, Interval{0.0, radius});
  const FieldSample at_r = eval(profile, radius);
  Admissibility adm;
  const SupResult s = sup_abs_z(profile);
  adm.sup_abs_z = s.sup;
  adm.argmax = s.argmax;
  adm.bc_residuals = {at_r.z - chi, radius * at_r.z_prime, c[1], c[3]};
  return Calibration{profile, profile.lambda(), adm};
}

CalibrabilityVerdict solve_complement(Dimension dim, double radius, int chi) {
  check_radius(radius, "complement");
  check_chi(chi, "complement");
  CalibrabilityVerdict v;
  if (dim.planar()) {
    v.calibrable = false;
    v.reason = VerdictReason::NoBoundedSolution;
    return v;
  }
  const auto c = complement_coefficients(dim, radius, chi);
  RadialProfile profile(dim, c, Interval{radius, kInfinity});
  const FieldSample at_r = eval(profile, radius);
  Admissibility adm;
  const SupResult s = sup_abs_z(profile);
  adm.sup_abs_z = s.sup;
  adm.argmax = s.argmax;
  adm.bc_residuals = {at_r.z + chi, radius * at_r.z_prime, c[0], c[2]};
  v.witness = Calibration{profile, profile.lambda(), adm};
  v.calibrable = admissible_sup(s.sup);
  v.reason = v.calibrable ? VerdictReason::Admissible : VerdictReason::ViolatesUnitBound;
  if (!v.calibrable) v.violation_radius = s.argmax;
  return v;
}

CalibrabilityVerdict solve_annulus(Dimension dim, double inner, double outer,
                                   const SignatureSpec& sig) {
  if (!sig.inner || !sig.outer) throw domain_error("annulus: both boundary signatures required");
  const auto c = annulus_coefficients(dim, inner, outer, *sig.inner, *sig.outer);
  RadialProfile profile(dim, c, Interval{inner, outer});
  const Admissibility adm = annulus_admissibility(profile, *sig.inner, *sig.outer);

  CalibrabilityVerdict v;
  v.witness = Calibration{profile, profile.lambda(), adm};
  v.calibrable = admissible_sup(adm.sup_abs_z);
  if (!v.calibrable) v.violation_radius = adm.argmax;

  // In n = 2 the overshoot of |z| just past Q* is cubic in Q - Q* and stays
  // below any sensible sampling tolerance; the curvature at the inner
  // boundary decides instead.
  if (v.calibrable && dim.planar() && sig.constant_sign()) {
    const double s = -static_cast<double>(*sig.outer);
    const double curvature = s * eval(profile, inner).z_second * outer * outer;
    if (curvature > 1e-9) {
      v.calibrable = false;
      v.violation_radius = inner;
    }
  }
  v.reason = v.calibrable ? VerdictReason::Admissible : VerdictReason::ViolatesUnitBound;
  return v;
}

double m_function(double q) {
  if (!(q > 1.0)) throw domain_error("m_function: Q must exceed 1");
  return std::log(q) - (q * q - 1.0) * (2.0 * q - 1.0) / (q * (q * q - 2.0 * q + 3.0));
}

double m_derivative(double q) {
  if (!(q > 1.0)) throw domain_error("m_derivative: Q must exceed 1");
  const double p = q * q - 2.0 * q + 3.0;
  return (q - 3.0) * (q - 1.0) * std::pow(q + 1.0, 3) / (q * q * p * p);
}

double compute_qstar() {
  static const double qstar = bisect(m_function, 3.0, 20.0, 1e-10);
  return qstar;
}

double planar_inner_curvature(double q) {
  if (!(q > 1.0)) throw domain_error("planar_inner_curvature: Q must exceed 1");
  const Dimension two(2);
  const auto c = annulus_coefficients(two, 1.0 / q, 1.0, -1, -1);
  return eval(RadialProfile(two, c, Interval{1.0 / q, 1.0}), 1.0 / q).z_second;
}

CalibrabilityVerdict classify(const GeneralizedAnnulus& domain, const SignatureSpec& sig) {
  switch (domain.kind()) {
    case DomainKind::Ball: {
      const Calibration cal = solve_ball(domain.dim(), domain.outer(), sig.outer.value_or(-1));
      CalibrabilityVerdict v;
      v.calibrable = admissible_sup(cal.admissibility.sup_abs_z);
      v.reason = v.calibrable ? VerdictReason::Admissible : VerdictReason::ViolatesUnitBound;
      if (!v.calibrable) v.violation_radius = cal.admissibility.argmax;
      v.witness = cal;
      return v;
    }
    case DomainKind::ComplementOfBall:
      return solve_complement(domain.dim(), domain.inner(), sig.inner.value_or(1));
    case DomainKind::Annulus:
      return solve_annulus(domain.dim(), domain.inner(), domain.outer(), sig);
    case DomainKind::WholeSpace:
      break;
  }
  throw Error(ErrorKind::Unsupported, "classify: the whole space is not treated");
}

double saint_venant_lambda(const GeneralizedAnnulus& domain, const SignatureSpec& sig) {
  if (!domain.bounded()) throw domain_error("saint_venant_lambda: domain must be bounded");
  const int n = domain.dim().value();
  const double r0 = domain.inner();
  const double r1 = domain.outer();
  const bool ball = domain.kind() == DomainKind::Ball;
  const int chi_out = sig.outer.value_or(-1);
  const int chi_in = ball ? 0 : sig.inner.value();
  check_chi(chi_out, "saint_venant_lambda");
  if (!ball) check_chi(chi_in, "saint_venant_lambda");

  // w = -r^2/(2n) + A + B g(r), g = r^(2-n) or log r
  auto g = [n](double r) { return n == 2 ? std::log(r) : std::pow(r, 2.0 - n); };
  auto g_prime = [n](double r) { return n == 2 ? 1.0 / r : (2.0 - n) * std::pow(r, 1.0 - n); };
  double a = r1 * r1 / (2.0 * n);
  double b = 0.0;
  if (!ball) {
    b = (r1 * r1 - r0 * r0) / (2.0 * n) / (g(r1) - g(r0));
    a = r1 * r1 / (2.0 * n) - b * g(r1);
  }
  const double area = unit_sphere_area(n);

  double int_w = -(std::pow(r1, n + 2.0) - std::pow(r0, n + 2.0)) / ((n + 2.0) * 2.0 * n) +
                 a * (std::pow(r1, n) - std::pow(r0, n)) / n;
  if (!ball) {
    if (n == 2) {
      auto prim = [](double r) { return r * r * (0.5 * std::log(r) - 0.25); };
      int_w += b * (prim(r1) - prim(r0));
    } else {
      int_w += b * (r1 * r1 - r0 * r0) / 2.0;
    }
  }
  int_w *= area;

  auto w_prime = [&](double r) { return -r / n + b * g_prime(r); };
  double boundary = chi_out * ((n - 1.0) / r1) * w_prime(r1) * area * std::pow(r1, n - 1.0) +
                    chi_out * area * std::pow(r1, n - 1.0);
  if (!ball) {
    boundary += chi_in * (-(n - 1.0) / r0) * (-w_prime(r0)) * area * std::pow(r0, n - 1.0) +
                chi_in * area * std::pow(r0, n - 1.0);
  }
  return boundary / int_w;
}

int inflection_count(const RadialProfile& profile) {
  return static_cast<int>(inflection_points(profile).size());
}

}  // namespace tvflow
