#include "tvk/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "tvk/errors.hpp"

namespace tvk {

RankReport check_full_row_rank(const Mat& M, double tol) {
  RankReport rep;
  rep.tol = tol;
  if (M.size() == 0) return rep;
  Eigen::BDCSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  rep.sigma_max = s(0);
  rep.sigma_min = M.rows() > M.cols() ? 0.0 : s(s.size() - 1);
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * rep.sigma_max) ++rep.rank;
  rep.full_row_rank = rep.sigma_max > 0.0 && M.rows() <= M.cols() && rep.sigma_min > tol * rep.sigma_max;
  return rep;
}

Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

Mat pinv_svd(const Mat& M, double rcond) {
  Eigen::BDCSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  Vec inv = Vec::Zero(s.size());
  const double cut = s.size() > 0 ? rcond * s(0) : 0.0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Mat spd_inverse(const Mat& M) {
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) {
    auto rep = check_full_row_rank(M);
    throw RankError("matrix is not positive definite", rep.rank, rep.tol);
  }
  return symmetrize(llt.solve(Mat::Identity(M.rows(), M.cols())));
}

Mat psd_sqrt(const Mat& M, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(M));
  Vec ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol * scale) throw DimensionError("matrix is not positive semidefinite");
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

double min_eigenvalue(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double spectral_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

}  // namespace tvk
