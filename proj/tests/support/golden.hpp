#pragma once

#include <cmath>
#include <functional>

namespace tdlab::testing {

// Golden-section minimisation of a unimodal f on [lo, hi].
inline double golden_section_min(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Near a flat minimum f itself stops resolving the minimiser at about
// sqrt(eps). A second golden pass on the central-difference slope magnitude
// sharpens it to a few ulps of the argument for smooth f.
inline double golden_section_min_refined(const std::function<double(double)>& f, double lo, double hi,
                                         double h = 1e-3) {
  const double m = golden_section_min(f, lo, hi);
  const double r = 1e-4 * (1.0 + std::abs(m));
  return golden_section_min([&](double x) { return std::abs(f(x + h) - f(x - h)); }, m - r, m + r, 1e-15);
}

}  // namespace tdlab::testing
