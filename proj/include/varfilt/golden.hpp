#pragma once

#include <cmath>
#include <utility>

namespace varfilt {

/// Golden-section minimization of f on [lo, hi] to relative interval
/// tolerance rel_tol. Returns (argmin, f(argmin)); endpoints are candidates,
/// so boundary minima are found exactly.
template <typename Fn>
std::pair<double, double> golden_section(Fn&& f, double lo, double hi,
                                         double rel_tol = 1e-8) {
  constexpr double inv_phi = 0.6180339887498948482;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > rel_tol * (std::abs(x1) + std::abs(x2) + 1e-300)) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  double xm = f1 < f2 ? x1 : x2;
  double fm = f1 < f2 ? f1 : f2;
  // Endpoint minima beat interior candidates when flat or monotone.
  const double flo = f(lo), fhi = f(hi);
  if (flo <= fm) {
    xm = lo;
    fm = flo;
  }
  if (fhi < fm) {
    xm = hi;
    fm = fhi;
  }
  return {xm, fm};
}

}  // namespace varfilt
