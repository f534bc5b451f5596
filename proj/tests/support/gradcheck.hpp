#pragma once

#include <algorithm>
#include <cmath>

namespace testsupport {

/// Central finite difference of a scalar function along one coordinate,
/// restoring the coordinate afterwards.
template <typename Fn>
double central_diff(Fn&& f, double* x, double h = 1e-4) {
  double orig = *x;
  *x = orig + h;
  double fp = f();
  *x = orig - h;
  double fm = f();
  *x = orig;
  return (fp - fm) / (2.0 * h);
}

/// Relative error with an absolute floor so exact zeros on both sides pass.
inline double rel_err(double a, double b, double floor_val = 1e-8) {
  double scale = std::max({std::abs(a), std::abs(b), floor_val});
  return std::abs(a - b) / scale;
}

}  // namespace testsupport
