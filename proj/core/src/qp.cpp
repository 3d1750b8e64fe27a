#include "tvk/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tvk/errors.hpp"

namespace tvk {

BoxQpResult solve_box_qp(const Mat& H, const Vec& f, const Vec& lo, const Vec& hi, const Vec* x0, int max_iter) {
  const Index n = f.size();
  if (H.rows() != n || H.cols() != n || lo.size() != n || hi.size() != n)
    throw DimensionError("box QP dimension mismatch");
  if ((lo.array() > hi.array()).any()) throw DimensionError("box QP lower bound exceeds upper bound");

  BoxQpResult res;
  Vec x = x0 && x0->size() == n ? Vec(*x0) : Vec(Vec::Zero(n));
  x = x.cwiseMax(lo).cwiseMin(hi);
  Eigen::VectorXi act = Eigen::VectorXi::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (x(i) <= lo(i)) act(i) = -1;
    else if (x(i) >= hi(i)) act(i) = 1;
  }
  const double scale = 1.0 + f.cwiseAbs().maxCoeff() + H.cwiseAbs().maxCoeff() * (1.0 + x.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;

  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    std::vector<Index> F;
    for (Index i = 0; i < n; ++i)
      if (act(i) == 0) F.push_back(i);
    const auto nf = static_cast<Index>(F.size());

    Vec cand = x;
    if (nf > 0) {
      Mat Hff(nf, nf);
      Vec rhs(nf);
      for (Index a = 0; a < nf; ++a) {
        double s = f(F[a]);
        for (Index j = 0; j < n; ++j)
          if (act(j) != 0) s += H(F[a], j) * x(j);
        rhs(a) = -s;
        for (Index c = 0; c < nf; ++c) Hff(a, c) = H(F[a], F[c]);
      }
      Eigen::LLT<Mat> llt(Hff);
      if (llt.info() != Eigen::Success) throw RankError("box QP Hessian is not positive definite", 0, 0.0);
      const Vec xf = llt.solve(rhs);
      for (Index a = 0; a < nf; ++a) cand(F[a]) = xf(a);
    }

    // Step towards the subspace minimizer, stopping at the first blocking bound.
    double alpha = 1.0;
    Index block = -1;
    for (Index i : F) {
      const double d = cand(i) - x(i);
      if (d < 0.0 && cand(i) < lo(i)) {
        const double a = (lo(i) - x(i)) / d;
        if (a < alpha) alpha = a, block = i;
      } else if (d > 0.0 && cand(i) > hi(i)) {
        const double a = (hi(i) - x(i)) / d;
        if (a < alpha) alpha = a, block = i;
      }
    }
    if (block >= 0) {
      x += std::max(alpha, 0.0) * (cand - x);
      x = x.cwiseMax(lo).cwiseMin(hi);
      act(block) = cand(block) < lo(block) ? -1 : 1;
      x(block) = act(block) < 0 ? lo(block) : hi(block);
      continue;
    }
    x = cand;

    // Release the bound with the most negative multiplier.
    const Vec g = H * x + f;
    Index worst = -1;
    double worst_v = tol;
    for (Index i = 0; i < n; ++i) {
      const double mult = act(i) < 0 ? g(i) : (act(i) > 0 ? -g(i) : 0.0);
      if (-mult > worst_v) worst_v = -mult, worst = i;
    }
    if (worst < 0) {
      res.converged = true;
      break;
    }
    act(worst) = 0;
  }

  const Vec g = H * x + f;
  res.x = x;
  res.active = act;
  res.multipliers = Vec::Zero(n);
  Vec pg = g;
  for (Index i = 0; i < n; ++i) {
    if (act(i) < 0) res.multipliers(i) = std::max(g(i), 0.0);
    if (act(i) > 0) res.multipliers(i) = std::max(-g(i), 0.0);
    if ((x(i) <= lo(i) && g(i) > 0.0) || (x(i) >= hi(i) && g(i) < 0.0)) pg(i) = 0.0;
  }
  res.pg_norm = pg.norm();
  res.objective = 0.5 * x.dot(H * x) + f.dot(x);
  return res;
}

}  // namespace tvk
