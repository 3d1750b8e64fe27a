#include "tvk/sdp.hpp"

#include <cmath>
#include <limits>

#include "tvk/errors.hpp"
#include "tvk/linalg.hpp"

namespace tvk {

int LmiProblem::add_block(const Mat& F0) {
  if (F0.rows() != F0.cols() || F0.rows() == 0) throw DimensionError("LMI block must be square and nonempty");
  blocks.push_back(LmiBlock{symmetrize(F0), Mat(F0.rows(), 0)});
  return static_cast<int>(blocks.size()) - 1;
}

int LmiProblem::add_vector(int block, const Vec& v) {
  Mat& B = blocks.at(static_cast<std::size_t>(block)).basis;
  if (v.size() != B.rows()) throw DimensionError("dictionary vector length mismatch");
  B.conservativeResize(Eigen::NoChange, B.cols() + 1);
  B.col(B.cols() - 1) = v;
  return static_cast<int>(B.cols()) - 1;
}

int LmiProblem::add_unit(int block, Index row) {
  const Index n = blocks.at(static_cast<std::size_t>(block)).F0.rows();
  return add_vector(block, Vec::Unit(n, row));
}

int LmiProblem::add_var(double cost) {
  terms.emplace_back();
  c.conservativeResize(c.size() + 1);
  c(c.size() - 1) = cost;
  return static_cast<int>(terms.size()) - 1;
}

void LmiProblem::add_term(int var, int block, int u, int w, double coef) {
  terms.at(static_cast<std::size_t>(var)).push_back(LmiTerm{block, u, w, coef});
}

void LmiProblem::add_entry(int var, int block, Index i, Index j, double coef) {
  const int u = add_unit(block, i);
  const int w = i == j ? u : add_unit(block, j);
  add_term(var, block, u, w, i == j ? 0.5 * coef : coef);
}

Mat LmiProblem::coefficient(int var, int block) const {
  const LmiBlock& bl = blocks.at(static_cast<std::size_t>(block));
  Mat F = Mat::Zero(bl.F0.rows(), bl.F0.cols());
  for (const auto& t : terms.at(static_cast<std::size_t>(var))) {
    if (t.block != block) continue;
    const auto vu = bl.basis.col(t.u);
    const auto vw = bl.basis.col(t.w);
    F.noalias() += t.coef * (vu * vw.transpose() + vw * vu.transpose());
  }
  return F;
}

Mat LmiProblem::evaluate(const Vec& y, int block) const {
  if (y.size() != num_vars()) throw DimensionError("variable vector length mismatch");
  Mat F = blocks.at(static_cast<std::size_t>(block)).F0;
  for (Index i = 0; i < num_vars(); ++i)
    if (y(i) != 0.0) F += y(i) * coefficient(static_cast<int>(i), block);
  return F;
}

void LmiProblem::validate() const {
  if (c.size() != num_vars()) throw DimensionError("objective length mismatch");
  for (const auto& ts : terms)
    for (const auto& t : ts) {
      if (t.block < 0 || t.block >= static_cast<int>(blocks.size())) throw DimensionError("term block out of range");
      const auto d = blocks[static_cast<std::size_t>(t.block)].basis.cols();
      if (t.u < 0 || t.w < 0 || t.u >= d || t.w >= d) throw DimensionError("term vector out of range");
    }
}

std::string sdp_status_name(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

namespace {

using Blocks = std::vector<Mat>;

struct BlockTerm {
  int var;
  int u;
  int w;
  double coef;
};

// Standard-form view: primal min <C,X> s.t. <A_i,X> = b_i, X >= 0; dual max b^T y
// s.t. S = C - sum y_i A_i >= 0, with C = F0, A_i = -F_i, b = -c.
class Solver {
 public:
  Solver(const LmiProblem& p, const SdpOptions& opt) : p_(p), opt_(opt) {
    nb_ = p.blocks.size();
    bt_.resize(nb_);
    for (std::size_t i = 0; i < p.terms.size(); ++i)
      for (const auto& t : p.terms[i])
        bt_[static_cast<std::size_t>(t.block)].push_back(BlockTerm{static_cast<int>(i), t.u, t.w, t.coef});
    m_ = p.num_vars();
    b_ = -p.c;
    for (const auto& bl : p.blocks) N_ += static_cast<double>(bl.F0.rows());
  }

  SdpSolution run();

 private:
  Vec opA(const Blocks& Z) const {
    Vec out = Vec::Zero(m_);
    for (std::size_t k = 0; k < nb_; ++k) {
      const Mat& B = p_.blocks[k].basis;
      const Mat Zv = B.transpose() * Z[k] * B;
      for (const auto& t : bt_[k]) out(t.var) -= t.coef * (Zv(t.w, t.u) + Zv(t.u, t.w));
    }
    return out;
  }

  Blocks opAT(const Vec& y) const {
    Blocks out(nb_);
    for (std::size_t k = 0; k < nb_; ++k) {
      const Mat& B = p_.blocks[k].basis;
      Mat Cm = Mat::Zero(B.cols(), B.cols());
      for (const auto& t : bt_[k]) Cm(t.u, t.w) -= y(t.var) * t.coef;
      out[k] = B * (Cm + Cm.transpose()) * B.transpose();
    }
    return out;
  }

  Blocks F(const Vec& y) const {
    Blocks out = opAT(y);
    for (std::size_t k = 0; k < nb_; ++k) out[k] = p_.blocks[k].F0 - out[k];
    return out;
  }

  Mat schur(const Blocks& X, const Blocks& Sinv) const {
    Mat M = Mat::Zero(m_, m_);
    for (std::size_t k = 0; k < nb_; ++k) {
      const Mat& B = p_.blocks[k].basis;
      const Mat Xv = B.transpose() * X[k] * B;
      const Mat Sv = B.transpose() * Sinv[k] * B;
      const auto& ts = bt_[k];
      for (std::size_t a = 0; a < ts.size(); ++a) {
        const BlockTerm& t = ts[a];
        for (std::size_t c = a; c < ts.size(); ++c) {
          const BlockTerm& s = ts[c];
          const double v = t.coef * s.coef *
                           (Xv(t.w, s.u) * Sv(s.w, t.u) + Xv(t.w, s.w) * Sv(s.u, t.u) +
                            Xv(t.u, s.u) * Sv(s.w, t.w) + Xv(t.u, s.w) * Sv(s.u, t.w));
          M(t.var, s.var) += v;
          if (a != c) M(s.var, t.var) += v;
        }
      }
    }
    return symmetrize(M);
  }

  static double inner(const Blocks& A, const Blocks& B) {
    double s = 0.0;
    for (std::size_t k = 0; k < A.size(); ++k) s += A[k].cwiseProduct(B[k]).sum();
    return s;
  }

  static double fro(const Blocks& A) { return std::sqrt(inner(A, A)); }

  // Largest alpha with X + alpha dX PSD (infinity when unbounded).
  static double max_step(const Blocks& X, const Blocks& dX) {
    double alpha = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < X.size(); ++k) {
      Eigen::LLT<Mat> llt(X[k]);
      if (llt.info() != Eigen::Success) return 0.0;
      const Mat T = llt.matrixL().solve(dX[k]);
      const Mat T2 = llt.matrixL().solve(T.transpose());
      const double lmin = min_eigenvalue(T2);
      if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
    }
    return alpha;
  }

  const LmiProblem& p_;
  SdpOptions opt_;
  std::size_t nb_ = 0;
  std::vector<std::vector<BlockTerm>> bt_;
  Index m_ = 0;
  Vec b_;
  double N_ = 0.0;
};

SdpSolution Solver::run() {
  SdpSolution sol;
  sol.status = SdpStatus::NumericalFailure;
  sol.y = Vec::Zero(m_);

  // Starting point scaled to the data.
  Blocks X(nb_), S(nb_);
  double normC = 0.0;
  for (std::size_t k = 0; k < nb_; ++k) normC = std::max(normC, p_.blocks[k].F0.norm());
  for (std::size_t k = 0; k < nb_; ++k) {
    const auto n = static_cast<double>(p_.blocks[k].F0.rows());
    double maxA = 0.0, ratio = 0.0;
    for (Index i = 0; i < m_; ++i) {
      bool touches = false;
      for (const auto& t : p_.terms[static_cast<std::size_t>(i)]) touches = touches || t.block == static_cast<int>(k);
      if (!touches) continue;
      const double a = p_.coefficient(static_cast<int>(i), static_cast<int>(k)).norm();
      maxA = std::max(maxA, a);
      ratio = std::max(ratio, (1.0 + std::abs(b_(i))) / (1.0 + a));
    }
    const double xi = std::max({10.0, std::sqrt(n), n * ratio});
    const double eta = std::max({10.0, std::sqrt(n), maxA, normC});
    X[k] = xi * Mat::Identity(p_.blocks[k].F0.rows(), p_.blocks[k].F0.rows());
    S[k] = eta * Mat::Identity(p_.blocks[k].F0.rows(), p_.blocks[k].F0.rows());
  }
  Vec y = Vec::Zero(m_);
  double normCsum = 0.0;
  for (const auto& bl : p_.blocks) normCsum += bl.F0.squaredNorm();
  normCsum = std::sqrt(normCsum);
  const double trX0 = [&] {
    double t = 0.0;
    for (const auto& x : X) t += x.trace();
    return t;
  }();

  // Best iterate by max(gap, infeasibilities); used when the iteration stalls near the optimum.
  SdpSolution best = sol;
  double best_merit = std::numeric_limits<double>::infinity();
  // Best iterate whose y satisfies the LMI to feas_tol, ranked by max(gap, X-side residual).
  SdpSolution best_feas = sol;
  double best_feas_merit = std::numeric_limits<double>::infinity();
  auto finish = [&]() {
    if (best_merit <= opt_.relaxed_tol) {
      best.status = SdpStatus::Optimal;
      best.reduced_accuracy = true;
      best.iterations = sol.iterations;
      return best;
    }
    if (best_feas_merit <= opt_.feasible_stall_tol) {
      best_feas.status = SdpStatus::Optimal;
      best_feas.reduced_accuracy = true;
      best_feas.iterations = sol.iterations;
      return best_feas;
    }
    return sol;
  };
  int stalled = 0;

  for (int it = 0; it <= opt_.max_iter; ++it) {
    sol.iterations = it;
    Blocks Sinv(nb_);
    for (std::size_t k = 0; k < nb_; ++k) {
      Eigen::LLT<Mat> llt(S[k]);
      if (llt.info() != Eigen::Success) return finish();
      Sinv[k] = symmetrize(llt.solve(Mat::Identity(S[k].rows(), S[k].cols())));
    }
    const Blocks Fy = F(y);
    Blocks Rd(nb_);
    for (std::size_t k = 0; k < nb_; ++k) Rd[k] = Fy[k] - S[k];
    const Vec rp = b_ - opA(X);
    const double mu = inner(X, S) / N_;
    const double pobj = [&] {
      double s = 0.0;
      for (std::size_t k = 0; k < nb_; ++k) s += p_.blocks[k].F0.cwiseProduct(X[k]).sum();
      return s;
    }();
    const double dobj = b_.dot(y);
    sol.rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    sol.primal_infeas = rp.norm() / (1.0 + b_.norm());
    sol.dual_infeas = fro(Rd) / (1.0 + normCsum);
    sol.y = y;
    sol.objective = p_.c.dot(y);
    if (sol.rel_gap <= opt_.gap_tol && sol.primal_infeas <= opt_.feas_tol && sol.dual_infeas <= opt_.feas_tol) {
      sol.status = SdpStatus::Optimal;
      return sol;
    }
    const double merit = std::max({sol.rel_gap, sol.primal_infeas, sol.dual_infeas});
    if (sol.dual_infeas <= opt_.feas_tol) {
      const double fm = std::max(sol.rel_gap, sol.primal_infeas);
      if (fm < best_feas_merit) {
        best_feas_merit = fm;
        best_feas = sol;
      }
    }
    if (merit < best_merit) {
      best_merit = merit;
      best = sol;
      stalled = 0;
    } else if (++stalled >= opt_.stall_iters) {
      break;
    }
    if (it == opt_.max_iter) break;
    double trX = 0.0;
    for (const auto& x : X) trX += x.trace();
    if (!std::isfinite(trX) || trX > 1e12 * trX0) break;

    const Mat M = schur(X, Sinv);
    Eigen::LLT<Mat> mchol(M);
    Eigen::LDLT<Mat> mldlt;
    const bool use_llt = mchol.info() == Eigen::Success;
    if (!use_llt) {
      mldlt.compute(M);
      if (mldlt.info() != Eigen::Success) break;
    }
    auto solveM = [&](const Vec& r) -> Vec { return use_llt ? Vec(mchol.solve(r)) : Vec(mldlt.solve(r)); };

    Blocks XRdSinv(nb_);
    for (std::size_t k = 0; k < nb_; ++k) XRdSinv[k] = X[k] * Rd[k] * Sinv[k];
    const Vec base = rp + opA(X) + opA(XRdSinv);

    auto direction = [&](const Vec& rhs, double sigma_mu, const Blocks* delta, Vec& dy, Blocks& dX, Blocks& dS) {
      dy = solveM(rhs);
      const Blocks ATdy = opAT(dy);
      dX.resize(nb_);
      dS.resize(nb_);
      for (std::size_t k = 0; k < nb_; ++k) {
        dS[k] = Rd[k] - ATdy[k];
        Mat T = X[k] * dS[k];
        if (delta) T += (*delta)[k];
        dX[k] = symmetrize(sigma_mu * Sinv[k] - X[k] - T * Sinv[k]);
      }
      // One refinement pass on the primal residual A(dX) = rp, which rounding in the
      // formula above breaks once S is nearly singular.
      const Vec z = solveM(rp - opA(dX));
      const Blocks ATz = opAT(z);
      for (std::size_t k = 0; k < nb_; ++k) dX[k] += symmetrize(X[k] * ATz[k] * Sinv[k]);
    };

    Vec dy;
    Blocks dX, dS;
    direction(base, 0.0, nullptr, dy, dX, dS);
    const double ap_aff = std::min(1.0, max_step(X, dX));
    const double ad_aff = std::min(1.0, max_step(S, dS));
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb_; ++k)
      mu_aff += (X[k] + ap_aff * dX[k]).cwiseProduct(S[k] + ad_aff * dS[k]).sum();
    mu_aff /= N_;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    Blocks delta(nb_), smuSinv(nb_);
    for (std::size_t k = 0; k < nb_; ++k) {
      delta[k] = dX[k] * dS[k];
      smuSinv[k] = sigma * mu * Sinv[k] - delta[k] * Sinv[k];
    }
    const Vec rhs = base - opA(smuSinv);
    direction(rhs, sigma * mu, &delta, dy, dX, dS);

    const double ap = std::min(1.0, opt_.step_fraction * max_step(X, dX));
    const double ad = std::min(1.0, opt_.step_fraction * max_step(S, dS));
    if (!(ap > 1e-12) && !(ad > 1e-12)) break;
    for (std::size_t k = 0; k < nb_; ++k) {
      X[k] = symmetrize(X[k] + ap * dX[k]);
      S[k] = symmetrize(S[k] + ad * dS[k]);
    }
    y += ad * dy;
  }
  return finish();
}

double min_eig_all(const LmiProblem& p, const Vec& y) {
  double e = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.blocks.size(); ++k) e = std::min(e, min_eigenvalue(p.evaluate(y, static_cast<int>(k))));
  return e;
}

}  // namespace

SdpSolution solve_lmi(const LmiProblem& p, const SdpOptions& opt) {
  p.validate();
  SdpSolution sol = Solver(p, opt).run();
  sol.min_eig = min_eig_all(p, sol.y);
  if (sol.status == SdpStatus::Optimal || !opt.phase_one_on_failure) return sol;

  // Phase one: maximize t subject to F(y) >= t I and t <= 1.
  LmiProblem q = p;
  q.c.setZero();
  const int t = q.add_var(-1.0);
  double scale = 1.0;
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    const auto kb = static_cast<int>(k);
    scale = std::max(scale, p.blocks[k].F0.norm());
    for (Index i = 0; i < p.blocks[k].F0.rows(); ++i) {
      const int u = q.add_unit(kb, i);
      q.add_term(t, kb, u, u, -0.5);
    }
  }
  const int cap = q.add_block(Mat::Ones(1, 1));
  const int u = q.add_unit(cap, 0);
  q.add_term(t, cap, u, u, -0.5);
  SdpOptions o1 = opt;
  o1.phase_one_on_failure = false;
  const SdpSolution ph = Solver(q, o1).run();
  sol.phase_one_margin = ph.y(t);
  if (ph.status == SdpStatus::Optimal && ph.y(t) < -1e-7 * scale) sol.status = SdpStatus::Infeasible;
  return sol;
}

}  // namespace tvk
