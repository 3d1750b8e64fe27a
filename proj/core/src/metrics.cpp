#include "tvk/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tvk/errors.hpp"

namespace tvk {

Vec error_series(const Mat& truth, const Mat& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw DimensionError("trajectory shape mismatch");
  if (truth.cols() < 1) throw DimensionError("empty trajectory");
  return (truth - pred).colwise().norm().transpose();
}

double metric_mae(const Mat& truth, const Mat& pred) { return error_series(truth, pred).mean(); }

double metric_rmse(const Mat& truth, const Mat& pred) {
  const Vec e = error_series(truth, pred);
  return std::sqrt(e.squaredNorm() / static_cast<double>(e.size()));
}

double metric_mae(const Vec& truth, const Vec& pred) {
  return metric_mae(Mat(truth.transpose()), Mat(pred.transpose()));
}

double metric_rmse(const Vec& truth, const Vec& pred) {
  return metric_rmse(Mat(truth.transpose()), Mat(pred.transpose()));
}

double median(std::vector<double> v) {
  if (v.empty()) throw DimensionError("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Aggregate aggregate(const std::vector<double>& values) {
  if (values.empty()) throw DimensionError("aggregate of empty set");
  Aggregate a;
  a.count = values.size();
  double s = 0.0;
  for (double v : values) s += v;
  a.mean = s / static_cast<double>(a.count);
  a.median = median(values);
  if (a.count == 1) {
    a.single = true;
    return a;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / static_cast<double>(a.count - 1));
  return a;
}

}  // namespace tvk
