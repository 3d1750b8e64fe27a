#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "tvk/koopman.hpp"
#include "tvk/lifting.hpp"
#include "tvk/snapshots.hpp"

namespace tvk {

// Shape of the observable to train. layers = [n, h1, ..., out] as for MlpSpec;
// an empty list means identity lifting.
struct LiftingSpec {
  std::vector<Index> layers;
  bool concat_state = false;
  bool fixed_decoder = false;
  bool normalize_inputs = false;

  Index lifted_dim(Index n) const;
  bool operator==(const LiftingSpec&) const = default;
};

struct TrainConfig {
  int epochs = 50;
  int steps_per_epoch = 50;
  AdamWConfig adam;
  double lambda = 1e-3;
  // When > 0, A is rescaled after each closed-form step so that ||A||_2 <= cap.
  double a_norm_cap = 0.0;

  bool operator==(const TrainConfig& o) const {
    return epochs == o.epochs && steps_per_epoch == o.steps_per_epoch && lambda == o.lambda &&
           a_norm_cap == o.a_norm_cap && adam.learning_rate == o.adam.learning_rate &&
           adam.weight_decay == o.adam.weight_decay && adam.beta1 == o.adam.beta1 &&
           adam.beta2 == o.adam.beta2 && adam.eps == o.adam.eps;
  }
};

// Joint EDMD loss with G = g(X), H = g(Y) recomputed from the observable.
double loss_eval(const Observable& g, const Mat& A, const Mat& B, const Mat& C, const DataMatrices& D);

// Gradient of loss_eval with respect to the network parameters (A, B, C fixed).
MlpParams loss_grad(const Observable& g, const Mat& A, const Mat& B, const Mat& C, const DataMatrices& D,
                    double* loss = nullptr);

struct TrainResult {
  LiftedModel model;
  std::vector<double> loss_history;  // loss after each closed-form step
};

// Alternates the closed-form EDMD solve with steps_per_epoch AdamW steps on θ.
TrainResult train_initial(const std::deque<Transition>& window, const LiftingSpec& spec, const TrainConfig& cfg,
                          std::uint64_t seed);
TrainResult train_initial(const TrajectoryBuffer& buffer, const LiftingSpec& spec, const TrainConfig& cfg,
                          std::uint64_t seed);

}  // namespace tvk
