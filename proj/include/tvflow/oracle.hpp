#pragma once

#include <array>
#include <functional>
#include <vector>

// Independent checking machinery. Nothing here calls into radial_core or
// calibration: basis functions are built and differentiated symbolically and
// the boundary-value problems are solved by plain Gaussian elimination.
namespace tvflow::oracle {

/// coef * r^power * (log r)^log_power
struct Term {
  double coef = 0.0;
  double power = 0.0;
  int log_power = 0;
};
using Expr = std::vector<Term>;

Expr simplify(Expr e);
Expr differentiate(const Expr& e);
Expr multiply_power(const Expr& e, double k);
Expr scale(const Expr& e, double s);
Expr add(const Expr& a, const Expr& b);
double evaluate(const Expr& e, double r);

/// -r^(1-n) (r^(n-1) (r^(1-n) (r^(n-1) z)')')'
Expr apply_operator(int n, const Expr& z);

/// Kernel-plus-particular basis of L z = const; i = 0 is the r^3 term.
Expr basis_function(int n, int i);

/// L applied to sum c_i basis_i, which must be a constant; returns it.
double lambda_of(int n, const std::array<double, 4>& c);

struct LinearSystem4 {
  std::array<std::array<double, 4>, 4> m{};
  std::array<double, 4> rhs{};
};

struct BoundaryData {
  double z_inner = 0.0;
  double dz_inner = 0.0;
  double z_outer = 0.0;
  double dz_outer = 0.0;
};

struct BvpSolution {
  std::array<double, 4> c{};
  double lambda = 0.0;
};

LinearSystem4 assemble(int n, double R0, double R1, const BoundaryData& bc);
std::array<double, 4> gauss_solve(LinearSystem4 sys);
BvpSolution bvp_solve(int n, double R0, double R1, const BoundaryData& bc);

/// Solution with c1 = c3 = 0 and z(R) = z_R, z'(R) = dz_R.
BvpSolution regular_solve(int n, double R, double z_R, double dz_R);

/// Samples are kept in extended precision: the residual takes three nested
/// differences, so double-rounded samples would dominate on fine grids.
struct GridFunction {
  std::vector<double> r;
  std::vector<long double> v;
};

/// sum c_i basis_i(r) on the grid, evaluated in extended precision.
GridFunction sample(int n, const std::array<double, 4>& c, const std::vector<double>& r);

/// Max over interior points of the nested-centred-difference residual of
/// L z - lambda. Needs at least 7 points.
double fd_ode_residual(const GridFunction& z, int n, double lambda);

using State = std::vector<double>;
using VectorField = std::function<State(double, const State&)>;

struct Trajectory {
  std::vector<double> t;
  std::vector<State> y;
};

/// Classical RK4 on [t0, t1]; the last step is shortened to land on t1.
Trajectory rk4(const VectorField& f, State y0, double t0, double t1, double dt);

/// int f(r) n omega_n r^(n-1) dr over [R0, R1] by adaptive Simpson. R1 may
/// be +inf (mapped through r = R0/u).
double radial_integral(const std::function<double(double)>& f, int n, double R0, double R1,
                       double tol = 1e-10);

/// Same integral in closed form for an expression of r^p (log r)^q terms.
double radial_integral(const Expr& f, int n, double R0, double R1);

}  // namespace tvflow::oracle
