#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <vector>

namespace tvflow {

/// Ambient dimension of R^n, n >= 1.
class Dimension {
 public:
  explicit Dimension(int n);
  int value() const noexcept { return n_; }
  bool planar() const noexcept { return n_ == 2; }
  friend bool operator==(Dimension, Dimension) = default;

 private:
  int n_;
};

constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Closed radial interval [lo, hi]; hi may be +infinity, lo may be 0.
struct Interval {
  double lo = 0.0;
  double hi = kInfinity;
};

/// Solution basis of the calibration ODE. Power: {r^3, r^(3-n), r, r^(1-n)}
/// for n != 2. Log: {r^3, r log r, r, 1/r} for n = 2.
enum class Basis { Power, Log };

/// Radial component z(r) of a field Z = z(|x|) x/|x| that solves
///   -r^(1-n) (r^(n-1) (r^(1-n) (r^(n-1) z)')')' = lambda,
/// stored as four coefficients over the basis matching n. lambda is a
/// function of the r^3 coefficient alone.
class RadialProfile {
 public:
  RadialProfile(Dimension dim, std::array<double, 4> coefficients,
                Interval domain);

  Dimension dim() const noexcept { return dim_; }
  Basis basis() const noexcept { return dim_.planar() ? Basis::Log : Basis::Power; }
  const std::array<double, 4>& coefficients() const noexcept { return c_; }
  Interval domain() const noexcept { return domain_; }

  /// lambda = -2n(n+2) c0 (this is -16 c0 when n = 2).
  double lambda() const noexcept;

  /// z alone, without the domain checks done by eval().
  double z(double r) const noexcept;

  RadialProfile negated() const;

 private:
  Dimension dim_;
  std::array<double, 4> c_;
  Interval domain_;
};

struct FieldSample {
  double r = 0.0;
  double z = 0.0;
  double z_prime = 0.0;
  double z_second = 0.0;
  double z_third = 0.0;
  double div_value = 0.0;       // z' + (n-1) z / r
  double grad_div_value = 0.0;  // d/dr of div_value
};

/// Analytic evaluation of z and its derivatives. r = 0 is accepted only for
/// profiles regular at the origin (c1 = c3 = 0) and returns the limits.
FieldSample eval(const RadialProfile& profile, double r);

/// -r^(1-n)(r^(n-1)(r^(1-n)(r^(n-1)z)')')' - lambda from the analytic
/// derivatives. Zero up to rounding for every profile.
double ode_residual(const RadialProfile& profile, double r);

struct SupResult {
  double sup = 0.0;
  double argmax = 0.0;  // 0 or +inf when |z| escapes at that end
};

/// Supremum of |z| over the profile's domain: stationary points plus dense
/// geometric sampling.
SupResult sup_abs_z(const RadialProfile& profile, std::size_t samples = 4096);

/// Radii in the open domain where z' = 0.
std::vector<double> stationary_points(const RadialProfile& profile);

/// Radii in the open domain where z'' changes sign. For n != 2 these are the
/// positive roots of w(r) = 6c0 r^(n+2) + (n-3)(n-2) c1 r^2 + n(n-1) c3, for
/// n = 2 of w(r) = 6c0 r^4 + c1 r^2 + 2c3.
std::vector<double> inflection_points(const RadialProfile& profile);

/// count points geometrically spaced over [lo, hi], lo > 0.
std::vector<double> geometric_grid(double lo, double hi, std::size_t count);

/// Volume of the unit ball in R^n.
double unit_ball_volume(int n);

/// Surface measure of the unit sphere, n * omega_n (equals 2 for n = 1).
double unit_sphere_area(int n);

}  // namespace tvflow
