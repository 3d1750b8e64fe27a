#pragma once

#include "tvk/types.hpp"

namespace tvk {

struct BoxQpResult {
  Vec x;
  Vec multipliers;  // >= 0 on active bounds (lower or upper), 0 on free components
  Eigen::VectorXi active;  // -1 at lower bound, +1 at upper bound, 0 free
  double objective = 0.0;  // 0.5 x^T H x + f^T x
  double pg_norm = 0.0;    // norm of the projected gradient
  int iterations = 0;
  bool converged = false;
};

// min 0.5 x^T H x + f^T x  s.t. lo <= x <= hi, H symmetric positive definite.
// Primal active-set method started from the projection of x0 (when given).
BoxQpResult solve_box_qp(const Mat& H, const Vec& f, const Vec& lo, const Vec& hi, const Vec* x0 = nullptr,
                         int max_iter = 500);

}  // namespace tvk
