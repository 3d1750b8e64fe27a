#pragma once

#include <cstdint>
#include <random>

#include "tvk/snapshots.hpp"
#include "tvk/types.hpp"

namespace tvk::test {

inline Mat random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Mat M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = nd(rng);
  return M;
}

inline Vec random_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

inline double max_abs(const Mat& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

// Pushes columns first..last of a recorded stream into the buffer.
inline void push_range(TrajectoryBuffer& buf, const Mat& X, const Mat& U, std::int64_t first, std::int64_t last) {
  for (std::int64_t k = first; k <= last; ++k) {
    const Vec u = k < U.cols() ? Vec(U.col(k)) : Vec(Vec::Zero(U.rows()));
    buf.push(Snapshot{k, X.col(k), u});
  }
}

}  // namespace tvk::test
