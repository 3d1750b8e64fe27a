#pragma once

#include <vector>

#include "tvk/types.hpp"

namespace tvk {

// Per-step Euclidean error norms; columns are time steps.
Vec error_series(const Mat& truth, const Mat& pred);

// (1/N) sum_k |x_k - xhat_k|_2
double metric_mae(const Mat& truth, const Mat& pred);
// sqrt((1/N) sum_k |x_k - xhat_k|_2^2)
double metric_rmse(const Mat& truth, const Mat& pred);
// Scalar-series forms.
double metric_mae(const Vec& truth, const Vec& pred);
double metric_rmse(const Vec& truth, const Vec& pred);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;     // unbiased (N-1); 0 when N == 1
  double median = 0.0;
  std::size_t count = 0;
  bool single = false;  // N == 1, std not estimable
};

Aggregate aggregate(const std::vector<double>& values);
double median(std::vector<double> values);

}  // namespace tvk
