#pragma once

// Closed-form ground truth computed by hand, kept independent of the library
// oracles so tests can cross-check them.

#include <array>
#include <cmath>

namespace tdlab::testing {

// Counterexample chain (A, B, C) under its optimal policy: A -> B, C -> B,
// B -> A w.p. 0.1 and C w.p. 0.9, g(C, B) = 1, phi = (1, 3, 2).
struct Counterexample {
  double alpha;

  std::array<double, 3> phi() const { return {1.0, 3.0, 2.0}; }
  std::array<double, 3> pi() const { return {0.05, 0.5, 0.45}; }
  std::array<double, 3> values() const {
    const double jb = 0.9 * alpha / (1.0 - alpha * alpha);
    return {alpha * jb, jb, 1.0 + alpha * jb};
  }

  // Sibling-pair error sum pi(i,j) [w (phi_i - phi_j) - J(i)]^2 over the
  // pairs (B,B) 0.5, (A,C) 0.05, (C,A) 0.45.
  double sibling_error(double w) const {
    const auto j = values();
    const auto f = phi();
    const double bb = 0.0 * w - j[1];
    const double ac = w * (f[0] - f[2]) - j[0];
    const double ca = w * (f[2] - f[0]) - j[2];
    return 0.5 * bb * bb + 0.05 * ac * ac + 0.45 * ca * ca;
  }

  // Product-distribution error over all ordered pairs.
  double product_error(double w) const {
    const auto j = values();
    const auto f = phi();
    const auto p = pi();
    double e = 0.0;
    for (int x = 0; x < 3; ++x) {
      for (int y = 0; y < 3; ++y) {
        const double r = w * (f[x] - f[y]) - (j[x] - j[y]);
        e += p[x] * p[y] * r * r;
      }
    }
    return e;
  }

  double std_limit_formula() const { return 0.9 + 0.72 * alpha * alpha / (1.0 - alpha * alpha); }
  // The closed form printed alongside the sign claim; kept for the record.
  double dt_printed_formula() const { return (-0.405 + 0.09 * alpha) / 0.695; }
};

// Two-state system, alpha given, optimal policy: E(w) = 0.2 (w - J(A))^2 +
// 0.8 (-w - J(B))^2 with phi(A) - phi(B) = 1.
struct TwoState {
  double alpha;

  double ja() const { return jb() - 0.8; }
  double jb() const { return (0.8 - 0.16 * alpha) / (1.0 - alpha); }
  double td_limit() const { return (0.2 * 2.0 * ja() + 0.8 * jb()) / (0.2 * 4.0 + 0.8); }
  double std_limit() const { return 0.2 * ja() - 0.8 * jb(); }
};

}  // namespace tdlab::testing
