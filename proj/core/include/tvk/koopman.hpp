#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "tvk/lifting.hpp"
#include "tvk/snapshots.hpp"
#include "tvk/types.hpp"

namespace tvk {

// Lifted surrogate: g_{k+1} = A g_k + B u_k, x = C g. P and Pbar are the
// ridge-regularized inverse Grams of [G;U] and H over the current window.
struct LiftedModel {
  Mat A, B, C, P, Pbar;
  std::shared_ptr<const Observable> obs;
  std::int64_t tau = 0;
  double lambda = 0.0;
  bool fixed_decoder = false;

  Index n() const { return C.rows(); }
  Index m() const { return B.cols(); }
  Index r() const { return A.rows(); }
  Mat AB() const;
  void validate() const;
};

// [A B] = H [G;U]^+ (lambda = 0, SVD) or H Z^T (Z Z^T + lambda I)^{-1}.
std::pair<Mat, Mat> solve_batch(const DataMatrices& D, double lambda = 0.0);
// C = Y H^+ or the ridge analogue.
Mat solve_decoder(const DataMatrices& D, double lambda = 0.0);
// P = (Z Z^T + lambda I)^{-1}, Pbar = (H H^T + lambda I)^{-1}.
std::pair<Mat, Mat> init_grams(const DataMatrices& D, double lambda);

// [G; U]
Mat stack_regressors(const DataMatrices& D);

// Decoder [I 0] of a concatenated lifting.
Mat concat_decoder(Index n, Index r);

LiftedModel fit_model(const DataMatrices& D, std::shared_ptr<const Observable> obs, double lambda,
                      bool fixed_decoder = false);

// EDMD residual ||Y - C H||^2 + ||H - A G - B U||^2 on precomputed lifted data.
double edmd_loss(const Mat& A, const Mat& B, const Mat& C, const DataMatrices& D);

Vec predict_step(const LiftedModel& model, const Vec& x, const Vec& u);

enum class RolloutMode { Lifted, Relift };

// Returns n x (steps+1) states; column 0 is x0 (decoded for Lifted mode starts from C g(x0)).
Mat predict_rollout(const LiftedModel& model, const Vec& x0, const Mat& U, Index steps,
                    RolloutMode mode = RolloutMode::Lifted);

// Binary model file. theta_ref names the checkpoint relative to the model file's directory.
void save_model(const std::string& path, const LiftedModel& model, const std::string& theta_ref);
LiftedModel load_model(const std::string& path, std::string* theta_ref = nullptr);

}  // namespace tvk
