#pragma once

#include <cmath>

#include "rootsgd/linalg.hpp"

namespace rootsgd::detail {

/// E||x||^8 for x ~ N(0, S) given the eigenvalues of S, from the cumulants of
/// sum_i lambda_i chi^2_1: kappa_n = 2^(n-1) (n-1)! sum_i lambda_i^n.
inline double gaussian_norm_eighth_moment(const Vector& eigenvalues) {
  double p1 = 0.0, p2 = 0.0, p3 = 0.0, p4 = 0.0;
  for (double l : eigenvalues) {
    p1 += l;
    p2 += l * l;
    p3 += l * l * l;
    p4 += l * l * l * l;
  }
  const double k1 = p1;
  const double k2 = 2.0 * p2;
  const double k3 = 8.0 * p3;
  const double k4 = 48.0 * p4;
  return k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 +
         k1 * k1 * k1 * k1;
}

/// Bound on sup_v (E||x x^T v||^4)^(1/4) for Gaussian x, via Cauchy-Schwarz:
/// E (x^T v)^4 ||x||^4 <= sqrt(105 (v^T S v)^4 E||x||^8).
inline double gaussian_outer_fourth_root_bound(const Vector& eigenvalues) {
  double lmax = 0.0;
  for (double l : eigenvalues) lmax = l > lmax ? l : lmax;
  return std::pow(105.0 * std::pow(lmax, 4) *
                      gaussian_norm_eighth_moment(eigenvalues),
                  0.125);
}

}  // namespace rootsgd::detail
