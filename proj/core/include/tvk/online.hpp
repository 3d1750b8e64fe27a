#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tvk/koopman.hpp"
#include "tvk/snapshots.hpp"

namespace tvk {

struct Feasibility {
  bool ok = false;
  double dynamics_ratio = 0.0;  // min|eig| / max|eig| of E + Z^T P Z
  double decoder_ratio = 0.0;   // same for E + W^T Pbar W
  explicit operator bool() const { return ok; }
};

// Invertibility of the 2b x 2b matrices of the low-rank update at relative tolerance tol.
Feasibility feasibility_check(const LiftedModel& model, const UpdateBatch& batch, double tol = 1e-9);

struct DynamicsUpdate {
  Mat A, B, P;
};
struct DecoderUpdate {
  Mat C, Pbar;
};

DynamicsUpdate update_dynamics(const LiftedModel& model, const UpdateBatch& batch);
DecoderUpdate update_decoder(const LiftedModel& model, const UpdateBatch& batch);

// Candidate model with both updates applied and tau incremented.
LiftedModel apply_update(const LiftedModel& model, const UpdateBatch& batch);

// ||C [A B] [g(X); U] - Y||_F^2
double fitting_error(const LiftedModel& model, const Mat& X, const Mat& U, const Mat& Y);

// True when the current model already fits the new batch (skip the update).
bool gate_epsilon(const LiftedModel& model, const Mat& X, const Mat& U, const Mat& Y, double eps);
// True when the candidate fits the new batch at least as well as the old model.
bool gate_improvement(const LiftedModel& old_model, const LiftedModel& cand, const Mat& X, const Mat& U,
                      const Mat& Y);

struct ErrorBoundInputs {
  double mu_x = 0.0;
  double mu_u = 0.0;
  double mu_g = 0.0;
  double e_recon = 0.0;
};

// (||CA|| mu_g + 1) mu_x + ||CB|| mu_u + E_recon with induced 2-norms.
double error_bound(const ErrorBoundInputs& in, const LiftedModel& model);

// Running maxima of state and input steps and the reconstruction error over the window.
ErrorBoundInputs measure_bound_inputs(const std::deque<Transition>& window, const LiftedModel& model, double mu_g);

enum class Method { Otvdkl, OtvdklGated, FixedDko, AccumulateOnly };

std::string method_name(Method m);
Method parse_method(const std::string& s);

struct OnlineConfig {
  Index w = 30;
  Index b = 10;
  Method method = Method::Otvdkl;
  bool epsilon_gate = false;
  bool improvement_gate = false;
  double epsilon = 0.0;
  double feasibility_tol = 1e-9;
  int stall_limit = 10;
  int refactor_every = 100;
  // AdamW steps on θ after each accepted update (0 keeps θ fixed online).
  int theta_refresh_steps = 0;

  // Gate flags implied by the method (gated variant enables both).
  static OnlineConfig for_method(Method m, Index w, Index b, double eps);
};

enum class Reason { None, Infeasible, EpsilonGate, ImprovementGate };
std::string reason_name(Reason r);

struct UpdateRecord {
  std::int64_t tau = 0;      // model index the batch was evaluated against
  std::int64_t k = 0;        // time index of the last successor in the batch
  bool accepted = false;
  Reason reason = Reason::None;
  double err_before = 0.0;   // fitting error of the current model on the new batch
  double err_after = 0.0;    // candidate's error (NaN when no candidate was built)
  double wall_us = 0.0;
  double induced_disturbance = 0.0;  // ||(A'-A) g + (B'-B) u|| at the batch's last sample
  bool stall = false;
};

// Online learning loop state: the buffer, the published model and the update log.
class OnlineLearner {
 public:
  OnlineLearner(LiftedModel model0, TrajectoryBuffer buffer, OnlineConfig cfg);

  // Push a snapshot and run the learning branch if a full batch is available.
  std::optional<UpdateRecord> push(const Snapshot& s);
  // Lifted value of a retained state (cached while θ is unchanged).
  const Vec& lift(std::int64_t k, const Vec& x) { return cache_.get(k, x); }
  Vec predict(std::int64_t k, const Vec& x, const Vec& u);
  void amend_latest_input(const Vec& u) { buffer_.amend_latest_input(u); }

  std::shared_ptr<const LiftedModel> model() const { return model_; }
  const TrajectoryBuffer& buffer() const { return buffer_; }
  const OnlineConfig& config() const { return cfg_; }
  const std::vector<UpdateRecord>& log() const { return log_; }
  std::size_t max_retained() const { return max_retained_; }
  int accepted() const { return accepted_; }
  double learning_wall_us() const { return learning_us_; }

 private:
  UpdateRecord learn();
  void refactor();
  void refresh_theta();

  std::shared_ptr<const LiftedModel> model_;
  TrajectoryBuffer buffer_;
  OnlineConfig cfg_;
  std::shared_ptr<const Observable> obs_;
  LiftCache cache_;
  std::vector<UpdateRecord> log_;
  std::size_t max_retained_ = 0;
  int accepted_ = 0;
  int consecutive_infeasible_ = 0;
  double learning_us_ = 0.0;
};

struct PredictionRow {
  std::int64_t k = 0;  // index of the predicted state
  Vec x_true;
  Vec x_pred;
};

struct OnlineRun {
  std::shared_ptr<const LiftedModel> model;
  std::vector<UpdateRecord> updates;
  std::vector<PredictionRow> predictions;
  std::size_t max_retained = 0;
  double online_wall_us = 0.0;
};

// Runs the online learning loop on a recorded stream Xs (n x N+1), Us (m x N). The learner's
// buffer must already hold snapshots up to index k0; one-step predictions are
// emitted for x_{k0+1} .. x_N.
OnlineRun run_online_learning(OnlineLearner& learner, const Mat& Xs, const Mat& Us, std::int64_t k0);

void write_update_log_csv(const std::string& path, const std::vector<UpdateRecord>& log);
void write_prediction_log_csv(const std::string& path, const std::vector<PredictionRow>& rows);

}  // namespace tvk
