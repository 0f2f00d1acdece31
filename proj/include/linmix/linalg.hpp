#pragma once

#include "linmix/common.hpp"

namespace linmix {

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Smallest eigenvalue of the symmetric part of m (+inf for an empty matrix).
double min_eigenvalue(const Mat& m);

/// log det(I + x * sigma) for symmetric PSD sigma, via eigenvalues clipped at 0.
double log_det_i_plus(const Mat& sigma, double x = 1.0);

/// Symmetric PSD square root, negative eigenvalues clipped to zero.
Mat psd_sqrt(const Mat& m);

}  // namespace linmix
