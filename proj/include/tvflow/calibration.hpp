#pragma once

#include <array>
#include <optional>

#include "tvflow/radial_core.hpp"

namespace tvflow {

enum class DomainKind { Ball, Annulus, ComplementOfBall, WholeSpace };

/// Rotationally invariant open set {inner < |x| < outer}; inner = 0 is a
/// ball, outer = inf a complement.
class GeneralizedAnnulus {
 public:
  GeneralizedAnnulus(Dimension dim, double inner, double outer);

  static GeneralizedAnnulus ball(Dimension dim, double radius) { return {dim, 0.0, radius}; }
  static GeneralizedAnnulus complement(Dimension dim, double radius) { return {dim, radius, kInfinity}; }

  Dimension dim() const noexcept { return dim_; }
  double inner() const noexcept { return inner_; }
  double outer() const noexcept { return outer_; }
  DomainKind kind() const noexcept;
  bool bounded() const noexcept;

 private:
  Dimension dim_;
  double inner_;
  double outer_;
};

/// Boundary signature: +1 where the solution rises leaving the set, -1 where
/// it falls. Balls carry only an outer value, complements only an inner one.
struct SignatureSpec {
  std::optional<int> inner;
  std::optional<int> outer;

  static SignatureSpec constant(int chi = -1) { return {chi, chi}; }
  /// Paper orientation for the non-constant case: +1 inside, -1 outside.
  static SignatureSpec alternating(int inner = 1) { return {inner, -inner}; }
  static SignatureSpec ball(int chi = -1) { return {std::nullopt, chi}; }
  static SignatureSpec complement(int chi = 1) { return {chi, std::nullopt}; }

  bool constant_sign() const { return inner && outer && *inner == *outer; }
};

struct Admissibility {
  double sup_abs_z = 0.0;
  double argmax = 0.0;
  /// Dimensionless residuals of the four boundary conditions:
  /// z(R0) - target, R0 z'(R0), z(R1) - target, R1 z'(R1). Regularity or
  /// decay conditions fill the slots of a missing boundary.
  std::array<double, 4> bc_residuals{};
};

struct Calibration {
  RadialProfile profile;
  double lambda = 0.0;
  Admissibility admissibility;
};

enum class VerdictReason { Admissible, ViolatesUnitBound, NoBoundedSolution };

struct CalibrabilityVerdict {
  bool calibrable = false;
  VerdictReason reason = VerdictReason::NoBoundedSolution;
  /// The solved profile; present even when inadmissible so it can be plotted.
  std::optional<Calibration> witness;
  std::optional<double> violation_radius;
};

/// Tolerance on sup|z| above 1 that still counts as admissible.
inline constexpr double kUnitBoundTolerance = 1e-10;
/// Largest dimension for which the annulus system is assembled.
inline constexpr int kMaxAnnulusDimension = 10;

Calibration solve_ball(Dimension dim, double radius, int chi = -1);
CalibrabilityVerdict solve_complement(Dimension dim, double radius, int chi = 1);
CalibrabilityVerdict solve_annulus(Dimension dim, double inner, double outer,
                                   const SignatureSpec& sig);

/// Coefficients of the annulus calibration without the admissibility
/// analysis. z(R0) = -chi_inner, z(R1) = chi_outer, z'(R0) = z'(R1) = 0.
std::array<double, 4> annulus_coefficients(Dimension dim, double inner, double outer,
                                           int chi_inner, int chi_outer);

/// Relative width below which annulus systems are solved in quad precision.
inline constexpr double kThinAnnulus = 0.05;

struct AnnulusBoundary {
  std::array<double, 4> coefficients{};
  double z2_inner = 0.0;  // z'' at the inner radius
  double z2_outer = 0.0;
};

/// Annulus coefficients together with z'' at both radii, evaluated before
/// the cancellation that thin annuli suffer in the monomial basis.
AnnulusBoundary annulus_boundary(Dimension dim, double inner, double outer, int chi_inner,
                                 int chi_outer);

/// Coefficients of the ball calibration (c1 = c3 = 0).
std::array<double, 4> ball_coefficients(Dimension dim, double radius, int chi);

/// Coefficients of the complement calibration (c0 = c2 = 0), n != 2.
std::array<double, 4> complement_coefficients(Dimension dim, double radius, int chi);

/// Printed closed forms in the Q = R1/R0 normalisation (n != 2), for the
/// orientations chi = -1 (constant) and chi_in = +1, chi_out = -1.
std::array<double, 4> annulus_closed_form_constant(Dimension dim, double inner, double outer);
std::array<double, 4> annulus_closed_form_alternating(Dimension dim, double inner, double outer);

/// m(Q) = log Q - (Q^2-1)(2Q-1) / (Q(Q^2-2Q+3)); its only zero on ]1,inf[ is Q*.
double m_function(double q);
double m_derivative(double q);

/// Critical ratio for n = 2 constant-signature annuli, by bisection on [3, 20].
double compute_qstar();

/// z''(R0) of the n = 2 constant-signature calibration in the chi = -1
/// orientation with R1 = 1. Non-positive exactly when Q <= Q*.
double planar_inner_curvature(double q);

CalibrabilityVerdict classify(const GeneralizedAnnulus& domain, const SignatureSpec& sig);

/// Facet speed from the Saint-Venant identity
///   lambda * int_U w_sv = int_dU chi kappa nu.grad w_sv + int_dU chi,
/// with all integrals in closed form. Bounded domains only.
double saint_venant_lambda(const GeneralizedAnnulus& domain, const SignatureSpec& sig);

/// Number of sign changes of z'' inside the profile's domain.
int inflection_count(const RadialProfile& profile);

}  // namespace tvflow
