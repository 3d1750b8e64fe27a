#pragma once

#include <string>
#include <vector>

#include "tvk/types.hpp"

namespace tvk {

// coef * (v_u v_w^T + v_w v_u^T) with v_u, v_w columns of the block's dictionary.
struct LmiTerm {
  int block = 0;
  int u = 0;
  int w = 0;
  double coef = 0.0;
};

struct LmiBlock {
  Mat F0;     // constant part, symmetric
  Mat basis;  // size x d dictionary of vectors used by the terms
};

// minimize c^T y  subject to  F_b(y) = F0_b + sum_i y_i F_{i,b} >= 0 for every block b.
// The coefficient matrices are sums of symmetric rank-two terms over a dense
// dictionary per block, which keeps the Schur-complement assembly cheap for
// structured LMIs such as the terminal-cost problem.
struct LmiProblem {
  std::vector<LmiBlock> blocks;
  std::vector<std::vector<LmiTerm>> terms;  // per variable
  Vec c;

  Index num_vars() const { return static_cast<Index>(terms.size()); }
  int add_block(const Mat& F0);
  int add_vector(int block, const Vec& v);
  int add_unit(int block, Index row);
  int add_var(double cost);
  void add_term(int var, int block, int u, int w, double coef);
  // Adds coef * e_i e_j^T + coef * e_j e_i^T (or coef * e_i e_i^T when i == j) via unit vectors.
  void add_entry(int var, int block, Index i, Index j, double coef);

  Mat coefficient(int var, int block) const;
  Mat evaluate(const Vec& y, int block) const;
  void validate() const;
};

enum class SdpStatus { Optimal, Infeasible, NumericalFailure };
std::string sdp_status_name(SdpStatus s);

struct SdpOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iter = 200;
  double step_fraction = 0.95;
  // Iterations without improvement of max(gap, infeasibility) before stopping.
  int stall_iters = 8;
  // A stalled run whose best iterate reaches this accuracy is reported optimal (reduced accuracy).
  double relaxed_tol = 1e-6;
  // Otherwise a stalled run is still reported optimal (reduced accuracy) when some iterate
  // satisfies the LMI to feas_tol with gap and X-side residual below this bound. The
  // returned y is feasible; only its optimality is approximate.
  double feasible_stall_tol = 1e-4;
  bool phase_one_on_failure = true;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  Vec y;
  double objective = 0.0;
  int iterations = 0;
  double rel_gap = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  double min_eig = 0.0;         // smallest eigenvalue of F(y) over all blocks
  double phase_one_margin = 0.0;  // max t with F(y) >= t I (only when phase one ran)
  bool reduced_accuracy = false;  // converged only to relaxed_tol or feasible_stall_tol
};

// Infeasible-start primal-dual path following with the HKM direction and
// Mehrotra predictor-corrector. When it fails to converge, a phase-one problem
// decides between Infeasible and NumericalFailure.
SdpSolution solve_lmi(const LmiProblem& p, const SdpOptions& opt = SdpOptions{});

}  // namespace tvk
