#include "tvk/training.hpp"

#include <cmath>

#include "tvk/errors.hpp"
#include "tvk/linalg.hpp"

namespace tvk {

Index LiftingSpec::lifted_dim(Index n) const {
  if (layers.empty()) return n;
  return (concat_state ? n : 0) + layers.back();
}

double loss_eval(const Observable& g, const Mat& A, const Mat& B, const Mat& C, const DataMatrices& D) {
  DataMatrices L = D;
  L.G = g.lift(D.X);
  L.H = g.lift(D.Y);
  return edmd_loss(A, B, C, L);
}

MlpParams loss_grad(const Observable& g, const Mat& A, const Mat& B, const Mat& C, const DataMatrices& D,
                    double* loss) {
  if (!g.has_network()) throw DimensionError("observable has no trainable parameters");
  const Index r = g.lifted_dim();
  if (A.rows() != r || A.cols() != r || B.rows() != r || C.cols() != r || C.rows() != D.Y.rows() ||
      B.cols() != D.U.rows())
    throw DimensionError("loss shapes mismatch");
  const Index off = g.network_row_offset();
  const MlpTrace tx = mlp_forward_trace(g.net(), g.network_input(D.X));
  const MlpTrace ty = mlp_forward_trace(g.net(), g.network_input(D.Y));
  Mat G(r, D.X.cols()), H(r, D.Y.cols());
  if (off > 0) {
    G.topRows(off) = D.X;
    H.topRows(off) = D.Y;
  }
  G.bottomRows(r - off) = tx.output();
  H.bottomRows(r - off) = ty.output();
  const Mat R1 = D.Y - C * H;
  const Mat R2 = H - A * G - B * D.U;
  if (loss) *loss = R1.squaredNorm() + R2.squaredNorm();
  const Mat dH = -2.0 * C.transpose() * R1 + 2.0 * R2;
  const Mat dG = -2.0 * A.transpose() * R2;
  MlpParams grad = MlpParams::zeros_like(g.net());
  mlp_backward(g.net(), tx, dG.bottomRows(r - off), grad);
  mlp_backward(g.net(), ty, dH.bottomRows(r - off), grad);
  return grad;
}

namespace {

LiftedModel closed_form(const DataMatrices& D, const std::shared_ptr<const Observable>& obs, const LiftingSpec& spec,
                        const TrainConfig& cfg, int epoch) {
  try {
    LiftedModel M = fit_model(D, obs, cfg.lambda, spec.fixed_decoder);
    if (cfg.a_norm_cap > 0.0) {
      const double s = spectral_norm(M.A);
      if (s > cfg.a_norm_cap) M.A *= cfg.a_norm_cap / s;
    }
    return M;
  } catch (const RankError& e) {
    throw TrainingError(std::string("closed-form step failed: ") + e.what(), epoch);
  }
}

}  // namespace

TrainResult train_initial(const std::deque<Transition>& window, const LiftingSpec& spec, const TrainConfig& cfg,
                          std::uint64_t seed) {
  if (window.empty()) throw CapacityError("no training data");
  if (cfg.epochs < 0 || cfg.steps_per_epoch < 0) throw DimensionError("negative epoch count");
  const Index n = window.front().x.size();
  Observable g;
  if (spec.layers.empty()) {
    g = Observable::identity(n);
  } else {
    if (spec.layers.front() != n) throw DimensionError("first layer size must equal the state dimension");
    MlpSpec ms{spec.layers};
    ms.validate();
    g = Observable::network(glorot_init(ms, seed), spec.concat_state);
  }
  DataMatrices D = assemble_data_matrices(window, g);
  if (spec.normalize_inputs && g.has_network()) {
    const Vec mean = D.X.rowwise().mean();
    Vec scale(n);
    for (Index i = 0; i < n; ++i) {
      const double sd = std::sqrt((D.X.row(i).array() - mean(i)).square().mean());
      scale(i) = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    g.set_input_normalization(mean, scale);
  }

  TrainResult out;
  auto obs = std::make_shared<Observable>(g);
  if (!g.has_network()) {
    out.model = closed_form(D, obs, spec, cfg, 0);
    out.loss_history.push_back(edmd_loss(out.model.A, out.model.B, out.model.C, D));
    return out;
  }

  OptimizerState opt = OptimizerState::for_params(obs->net(), cfg.adam);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    D.G = obs->lift(D.X);
    D.H = obs->lift(D.Y);
    const LiftedModel M = closed_form(D, obs, spec, cfg, epoch);
    out.loss_history.push_back(edmd_loss(M.A, M.B, M.C, D));
    for (int s = 0; s < cfg.steps_per_epoch; ++s) {
      double loss = 0.0;
      const MlpParams grad = loss_grad(*obs, M.A, M.B, M.C, D, &loss);
      if (!std::isfinite(loss) || !grad.all_finite())
        throw TrainingError("non-finite loss or gradient at step " + std::to_string(s), epoch);
      optimizer_step(obs->net(), grad, opt);
    }
    if (!obs->net().all_finite()) throw TrainingError("parameters diverged", epoch);
  }
  D.G = obs->lift(D.X);
  D.H = obs->lift(D.Y);
  auto frozen = std::make_shared<const Observable>(*obs);
  out.model = closed_form(D, frozen, spec, cfg, cfg.epochs);
  out.loss_history.push_back(edmd_loss(out.model.A, out.model.B, out.model.C, D));
  return out;
}

TrainResult train_initial(const TrajectoryBuffer& buffer, const LiftingSpec& spec, const TrainConfig& cfg,
                          std::uint64_t seed) {
  if (!buffer.window_formed()) throw CapacityError("buffer holds fewer than w+1 snapshots");
  return train_initial(buffer.window(), spec, cfg, seed);
}

}  // namespace tvk
