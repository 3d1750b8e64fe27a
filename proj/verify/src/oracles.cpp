#include "tvk/verify/oracles.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace tvk::oracle {

BatchFit batch_ridge(const Mat& Z, const Mat& H, const Mat& Y, double lambda) {
  BatchFit f;
  f.gram_z = Z * Z.transpose() + lambda * Mat::Identity(Z.rows(), Z.rows());
  f.gram_h = H * H.transpose() + lambda * Mat::Identity(H.rows(), H.rows());
  // Solve against the symmetric Grams instead of forming inverses.
  f.AB = f.gram_z.ldlt().solve(Z * H.transpose()).transpose();
  f.C = f.gram_h.ldlt().solve(H * Y.transpose()).transpose();
  return f;
}

double row_rank_ratio(const Mat& M) {
  if (M.rows() > M.cols()) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  if (s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

LtvData random_ltv(Index n, Index m, Index N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  Mat A0(n, n), A1(n, n), B(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      A0(i, j) = nd(rng);
      A1(i, j) = nd(rng);
    }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) B(i, j) = nd(rng);
  const double rho = Eigen::EigenSolver<Mat>(A0).eigenvalues().cwiseAbs().maxCoeff();
  A0 *= 0.8 / rho;
  A1 *= 0.8 / (rho * std::sqrt(static_cast<double>(n)));
  LtvData d;
  d.X.resize(n, N + 1);
  d.U.resize(m, N);
  for (Index i = 0; i < n; ++i) d.X(i, 0) = ud(rng);
  for (Index k = 0; k < N; ++k) {
    for (Index j = 0; j < m; ++j) d.U(j, k) = ud(rng);
    const Mat Ak = A0 + 0.1 * std::sin(0.05 * static_cast<double>(k)) * A1;
    d.X.col(k + 1) = Ak * d.X.col(k) + B * d.U.col(k);
  }
  return d;
}

double mpc_cost(const Mat& A, const Mat& B, const Vec& g, const Mat& Q, const Mat& R, const Mat& P, const Mat& U) {
  Vec s = g;
  double J = 0.0;
  for (Index j = 0; j < U.cols(); ++j) {
    const Vec u = U.col(j);
    J += s.dot(Q * s) + u.dot(R * u);
    s = A * s + B * u;
  }
  return J + s.dot(P * s);
}

double grid_mpc_best(const Mat& A, const Mat& B, const Vec& g, const Mat& Q, double R, const Mat& P, Index H,
                     double lo, double hi, int levels) {
  std::vector<double> grid(static_cast<std::size_t>(levels));
  for (int i = 0; i < levels; ++i) grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (levels - 1);
  double best = std::numeric_limits<double>::infinity();
  const Vec b = B.col(0);
  std::function<void(const Vec&, Index, double)> rec = [&](const Vec& s, Index depth, double J) {
    if (depth == H) {
      best = std::min(best, J + s.dot(P * s));
      return;
    }
    const double stage = J + s.dot(Q * s);
    const Vec As = A * s;
    for (double u : grid) rec(As + u * b, depth + 1, stage + R * u * u);
  };
  rec(g, 0, 0.0);
  return best;
}

std::vector<double> terminal_lmi_min_eigs(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Vec& g,
                                          const Vec& ubar2, double gamma, const Mat& Pbar, const Mat& Y) {
  const Index r = A.rows(), m = B.cols();
  Eigen::SelfAdjointEigenSolver<Mat> qe(Q), re(R);
  const Mat Qh = qe.eigenvectors() * qe.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                 qe.eigenvectors().transpose();
  const Mat Rh = re.eigenvectors() * re.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                 re.eigenvectors().transpose();
  const Mat M = A * Pbar + B * Y;

  Mat F1 = Mat::Zero(3 * r + m, 3 * r + m);
  F1.block(0, 0, r, r) = Pbar;
  F1.block(r, 0, r, r) = M;
  F1.block(2 * r, 0, r, r) = Qh * Pbar;
  F1.block(3 * r, 0, m, r) = Rh * Y;
  F1.block(r, r, r, r) = Pbar;
  F1.block(2 * r, 2 * r, r, r) = gamma * Mat::Identity(r, r);
  F1.block(3 * r, 3 * r, m, m) = gamma * Mat::Identity(m, m);
  F1 = F1.selfadjointView<Eigen::Lower>();

  Mat F2(r + 1, r + 1);
  F2(0, 0) = 1.0;
  F2.block(1, 0, r, 1) = g;
  F2.block(0, 1, 1, r) = g.transpose();
  F2.block(1, 1, r, r) = Pbar;

  Mat F3(m + r, m + r);
  F3.block(0, 0, m, m) = ubar2.asDiagonal();
  F3.block(0, m, m, r) = Y;
  F3.block(m, 0, r, m) = Y.transpose();
  F3.block(m, m, r, r) = Pbar;

  std::vector<double> out;
  for (const Mat* F : {&F1, &F2, &F3}) {
    const Mat S = 0.5 * (*F + F->transpose());
    out.push_back(Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues()(0));
  }
  return out;
}

}  // namespace tvk::oracle
