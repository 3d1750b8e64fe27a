#pragma once

#include "tvk/types.hpp"

namespace tvk {

struct RankReport {
  bool full_row_rank = false;
  Index rank = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double tol = 0.0;
};

// Full row rank iff rows <= cols and sigma_min > tol * sigma_max.
RankReport check_full_row_rank(const Mat& M, double tol = 1e-9);

Mat symmetrize(const Mat& M);

// Moore-Penrose pseudoinverse with singular values below rcond * sigma_max dropped.
Mat pinv_svd(const Mat& M, double rcond = 1e-12);

// Inverse of a symmetric positive definite matrix via Cholesky; throws RankError if not PD.
Mat spd_inverse(const Mat& M);

// Symmetric square root of a PSD matrix. Eigenvalues below -tol*max|eig| raise; small negatives clamp to 0.
Mat psd_sqrt(const Mat& M, double tol = 1e-10);

double min_eigenvalue(const Mat& S);
double spectral_norm(const Mat& M);

}  // namespace tvk
