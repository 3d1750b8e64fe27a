#pragma once

#include <cstdint>
#include <vector>

#include "tvk/types.hpp"

// Reference computations used to check the library. They share no code with
// the routes they check beyond Eigen.
namespace tvk::oracle {

// Ridge least squares over a full window.
struct BatchFit {
  Mat AB;     // H Z^T (Z Z^T + lambda I)^-1
  Mat C;      // Y H^T (H H^T + lambda I)^-1
  Mat gram_z; // Z Z^T + lambda I
  Mat gram_h; // H H^T + lambda I
};
BatchFit batch_ridge(const Mat& Z, const Mat& H, const Mat& Y, double lambda);

// sigma_min / sigma_max of M, 0 when M has more rows than columns.
double row_rank_ratio(const Mat& M);

// Random linear time-varying trajectory: A_k = A0 + 0.1 sin(0.05 k) A1 (spectral radius about 0.9).
struct LtvData {
  Mat X;  // n x (N+1)
  Mat U;  // m x N
};
LtvData random_ltv(Index n, Index m, Index N, std::uint64_t seed);

// Stage cost sum_{j<H} (g_j' Q g_j + u_j' R u_j) + g_H' P g_H by forward simulation.
double mpc_cost(const Mat& A, const Mat& B, const Vec& g, const Mat& Q, const Mat& R, const Mat& P, const Mat& U);

// Best cost over every input sequence whose entries take `levels` equispaced values in [lo, hi] (m = 1).
double grid_mpc_best(const Mat& A, const Mat& B, const Vec& g, const Mat& Q, double R, const Mat& P, Index H,
                     double lo, double hi, int levels);

// Smallest eigenvalue of each terminal-cost LMI block at (gamma, Pbar, Y) with input bound diag(ubar2).
std::vector<double> terminal_lmi_min_eigs(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Vec& g,
                                          const Vec& ubar2, double gamma, const Mat& Pbar, const Mat& Y);

}  // namespace tvk::oracle
