#pragma once

#include <cmath>

#include "tvflow/errors.hpp"

namespace tvflow {

/// Root of f on [lo, hi] by bisection; f(lo) and f(hi) must differ in sign.
/// Stops once the bracket is narrower than abs_tol.
template <typename F>
double bisect(F&& f, double lo, double hi, double abs_tol, int max_iter = 200) {
  double f_lo = f(lo);
  const double f_hi = f(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo < 0.0) == (f_hi < 0.0)) {
    throw domain_error("bisect: f does not change sign on the bracket");
  }
  for (int it = 0; it < max_iter && hi - lo > abs_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

}  // namespace tvflow
