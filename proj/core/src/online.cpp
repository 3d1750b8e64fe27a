#include "tvk/online.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "tvk/errors.hpp"
#include "tvk/linalg.hpp"
#include "tvk/training.hpp"

namespace tvk {

namespace {

// Inverse of the symmetric matrix diag(E) + M^T S M; reports the relative eigenvalue gap.
struct SmallSolve {
  Mat inverse;
  double ratio = 0.0;
};

SmallSolve small_inverse(const Vec& E, const Mat& M, const Mat& SM, bool want_inverse) {
  Mat S = M.transpose() * SM;
  S.diagonal() += E;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(S), want_inverse ? Eigen::ComputeEigenvectors
                                                                    : Eigen::EigenvaluesOnly);
  const Vec ev = es.eigenvalues();
  const double big = ev.cwiseAbs().maxCoeff();
  SmallSolve out;
  out.ratio = big > 0.0 ? ev.cwiseAbs().minCoeff() / big : 0.0;
  if (want_inverse) {
    if (!(out.ratio > 1e-15)) throw FeasibilityError("update system is singular");
    out.inverse = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  }
  return out;
}

void check_batch(const LiftedModel& model, const UpdateBatch& batch) {
  const Index c = batch.Z.cols();
  if (batch.Z.rows() != model.r() + model.m() || batch.W.rows() != model.r() || batch.V.rows() != model.n() ||
      batch.W.cols() != c || batch.V.cols() != c || batch.E.size() != c)
    throw DimensionError("update batch does not match model");
}

double now_us() {
  using namespace std::chrono;
  return static_cast<double>(duration_cast<nanoseconds>(steady_clock::now().time_since_epoch()).count()) * 1e-3;
}

}  // namespace

Feasibility feasibility_check(const LiftedModel& model, const UpdateBatch& batch, double tol) {
  check_batch(model, batch);
  Feasibility f;
  f.dynamics_ratio = small_inverse(batch.E, batch.Z, model.P * batch.Z, false).ratio;
  f.decoder_ratio = small_inverse(batch.E, batch.W, model.Pbar * batch.W, false).ratio;
  f.ok = f.dynamics_ratio > tol && f.decoder_ratio > tol;
  return f;
}

DynamicsUpdate update_dynamics(const LiftedModel& model, const UpdateBatch& batch) {
  check_batch(model, batch);
  const Mat PZ = model.P * batch.Z;
  const Mat gamma = small_inverse(batch.E, batch.Z, PZ, true).inverse;
  const Mat AB = model.AB();
  const Mat innov = batch.W - AB * batch.Z;
  const Mat gPZt = gamma * PZ.transpose();
  const Mat AB1 = AB + innov * gPZt;
  DynamicsUpdate out;
  out.A = AB1.leftCols(model.r());
  out.B = AB1.rightCols(model.m());
  out.P = symmetrize(model.P - PZ * gPZt);
  return out;
}

DecoderUpdate update_decoder(const LiftedModel& model, const UpdateBatch& batch) {
  check_batch(model, batch);
  const Mat PW = model.Pbar * batch.W;
  const Mat gamma = small_inverse(batch.E, batch.W, PW, true).inverse;
  const Mat gPWt = gamma * PW.transpose();
  DecoderUpdate out;
  out.C = model.fixed_decoder ? model.C : Mat(model.C + (batch.V - model.C * batch.W) * gPWt);
  out.Pbar = symmetrize(model.Pbar - PW * gPWt);
  return out;
}

LiftedModel apply_update(const LiftedModel& model, const UpdateBatch& batch) {
  LiftedModel cand = model;
  DynamicsUpdate d = update_dynamics(model, batch);
  DecoderUpdate c = update_decoder(model, batch);
  cand.A = std::move(d.A);
  cand.B = std::move(d.B);
  cand.P = std::move(d.P);
  cand.C = std::move(c.C);
  cand.Pbar = std::move(c.Pbar);
  cand.tau = model.tau + 1;
  return cand;
}

double fitting_error(const LiftedModel& model, const Mat& X, const Mat& U, const Mat& Y) {
  if (X.cols() != U.cols() || X.cols() != Y.cols() || U.rows() != model.m()) throw DimensionError("batch shapes");
  return (model.C * (model.A * model.obs->lift(X) + model.B * U) - Y).squaredNorm();
}

bool gate_epsilon(const LiftedModel& model, const Mat& X, const Mat& U, const Mat& Y, double eps) {
  if (eps < 0.0) throw DimensionError("epsilon must be nonnegative");
  return fitting_error(model, X, U, Y) <= eps;
}

bool gate_improvement(const LiftedModel& old_model, const LiftedModel& cand, const Mat& X, const Mat& U,
                      const Mat& Y) {
  return fitting_error(cand, X, U, Y) <= fitting_error(old_model, X, U, Y);
}

double error_bound(const ErrorBoundInputs& in, const LiftedModel& model) {
  if (in.mu_x < 0 || in.mu_u < 0 || in.mu_g < 0 || in.e_recon < 0) throw DimensionError("bound inputs must be >= 0");
  const double ca = spectral_norm(model.C * model.A);
  const double cb = model.m() > 0 ? spectral_norm(model.C * model.B) : 0.0;
  return (ca * in.mu_g + 1.0) * in.mu_x + cb * in.mu_u + in.e_recon;
}

ErrorBoundInputs measure_bound_inputs(const std::deque<Transition>& window, const LiftedModel& model, double mu_g) {
  ErrorBoundInputs in;
  in.mu_g = mu_g;
  for (std::size_t j = 0; j < window.size(); ++j) {
    const Transition& t = window[j];
    in.mu_x = std::max(in.mu_x, (t.x_next - t.x).norm());
    if (j > 0 && window[j - 1].k + 1 == t.k) in.mu_u = std::max(in.mu_u, (t.u - window[j - 1].u).norm());
    for (const Vec* x : {&t.x, &t.x_next})
      in.e_recon = std::max(in.e_recon, (*x - model.C * model.obs->lift(*x)).norm());
  }
  return in;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Otvdkl: return "otvdkl";
    case Method::OtvdklGated: return "otvdkl-gated";
    case Method::FixedDko: return "fixed-dko";
    case Method::AccumulateOnly: return "accumulate-only";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::Otvdkl, Method::OtvdklGated, Method::FixedDko, Method::AccumulateOnly})
    if (method_name(m) == s) return m;
  throw ConfigError("unknown method '" + s + "'");
}

std::string reason_name(Reason r) {
  switch (r) {
    case Reason::None: return "none";
    case Reason::Infeasible: return "infeasible";
    case Reason::EpsilonGate: return "epsilon-gate";
    case Reason::ImprovementGate: return "improvement-gate";
  }
  return "unknown";
}

OnlineConfig OnlineConfig::for_method(Method m, Index w, Index b, double eps) {
  OnlineConfig c;
  c.w = w;
  c.b = b;
  c.method = m;
  c.epsilon = eps;
  c.epsilon_gate = c.improvement_gate = (m == Method::OtvdklGated);
  return c;
}

OnlineLearner::OnlineLearner(LiftedModel model0, TrajectoryBuffer buffer, OnlineConfig cfg)
    : buffer_(std::move(buffer)), cfg_(cfg) {
  model0.validate();
  if (!model0.obs) throw DimensionError("model has no observable");
  if (buffer_.w() != cfg_.w || buffer_.b() != cfg_.b) throw DimensionError("buffer sizes differ from config");
  if (!buffer_.window_formed()) throw CapacityError("learner needs a formed window");
  if (cfg_.epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
  obs_ = model0.obs;
  model_ = std::make_shared<const LiftedModel>(std::move(model0));
  cache_.bind(obs_.get());
  max_retained_ = buffer_.retained();
}

Vec OnlineLearner::predict(std::int64_t k, const Vec& x, const Vec& u) {
  const LiftedModel& M = *model_;
  return M.C * (M.A * cache_.get(k, x) + M.B * u);
}

std::optional<UpdateRecord> OnlineLearner::push(const Snapshot& s) {
  buffer_.push(s);
  max_retained_ = std::max(max_retained_, buffer_.retained());
  if (!buffer_.batch_ready()) return std::nullopt;
  if (cfg_.method == Method::FixedDko) {
    buffer_.discard_new();
    cache_.retain_live(buffer_);
    return std::nullopt;
  }
  UpdateRecord rec = learn();
  log_.push_back(rec);
  return rec;
}

UpdateRecord OnlineLearner::learn() {
  const double t0 = now_us();
  const LiftedModel& M = *model_;
  const Index b = buffer_.b();
  const BatchMode mode = cfg_.method == Method::AccumulateOnly ? BatchMode::Accumulate : BatchMode::Sliding;
  const UpdateBatch batch = form_update_batch(buffer_, cache_, mode);
  const Mat Zn = batch.Z.rightCols(b);
  const Mat Vn = batch.V.rightCols(b);

  UpdateRecord rec;
  rec.tau = M.tau;
  rec.k = *buffer_.last_index();
  rec.err_after = std::numeric_limits<double>::quiet_NaN();
  rec.err_before = (M.C * (M.AB() * Zn) - Vn).squaredNorm();

  bool accept = false;
  if (!feasibility_check(M, batch, cfg_.feasibility_tol)) {
    rec.reason = Reason::Infeasible;
    rec.stall = ++consecutive_infeasible_ > cfg_.stall_limit;
  } else {
    consecutive_infeasible_ = 0;
    if (cfg_.epsilon_gate && rec.err_before <= cfg_.epsilon) {
      rec.reason = Reason::EpsilonGate;
    } else {
      LiftedModel cand = apply_update(M, batch);
      rec.err_after = (cand.C * (cand.AB() * Zn) - Vn).squaredNorm();
      if (cfg_.improvement_gate && rec.err_after > rec.err_before) {
        rec.reason = Reason::ImprovementGate;
      } else {
        const Vec z = Zn.col(b - 1);
        rec.induced_disturbance = ((cand.AB() - M.AB()) * z).norm();
        model_ = std::make_shared<const LiftedModel>(std::move(cand));
        accept = true;
      }
    }
  }
  if (accept) {
    if (mode == BatchMode::Accumulate)
      buffer_.append();
    else
      buffer_.advance();
    rec.accepted = true;
    ++accepted_;
    if (cfg_.theta_refresh_steps > 0)
      refresh_theta();
    else if (cfg_.refactor_every > 0 && accepted_ % cfg_.refactor_every == 0)
      refactor();
  } else {
    buffer_.discard_new();
  }
  cache_.retain_live(buffer_);
  rec.wall_us = now_us() - t0;
  learning_us_ += rec.wall_us;
  return rec;
}

void OnlineLearner::refactor() {
  LiftedModel M = *model_;
  DataMatrices D;
  const auto& win = buffer_.window();
  const Index w = static_cast<Index>(win.size());
  D.G.resize(M.r(), w);
  D.H.resize(M.r(), w);
  D.U.resize(M.m(), w);
  Index j = 0;
  for (const auto& t : win) {
    D.G.col(j) = cache_.get(t.k, t.x);
    D.H.col(j) = cache_.get(t.k + 1, t.x_next);
    D.U.col(j) = t.u;
    ++j;
  }
  std::tie(M.P, M.Pbar) = init_grams(D, M.lambda);
  model_ = std::make_shared<const LiftedModel>(std::move(M));
}

void OnlineLearner::refresh_theta() {
  const LiftedModel& M = *model_;
  if (!obs_->has_network()) return;
  auto g = std::make_shared<Observable>(*obs_);
  DataMatrices D = assemble_data_matrices(buffer_.window(), *g);
  OptimizerState opt = OptimizerState::for_params(g->net(), AdamWConfig{});
  for (int s = 0; s < cfg_.theta_refresh_steps; ++s) optimizer_step(g->net(), loss_grad(*g, M.A, M.B, M.C, D), opt);
  obs_ = g;
  D.G = g->lift(D.X);
  D.H = g->lift(D.Y);
  LiftedModel refit = fit_model(D, obs_, M.lambda, M.fixed_decoder);
  refit.tau = M.tau;
  model_ = std::make_shared<const LiftedModel>(std::move(refit));
  cache_.bind(obs_.get());
}

OnlineRun run_online_learning(OnlineLearner& learner, const Mat& Xs, const Mat& Us, std::int64_t k0) {
  const auto last = learner.buffer().last_index();
  if (!last || *last != k0) throw SequencingError("learner buffer must end at the start index");
  const Index N = Xs.cols() - 1;
  if (Us.cols() < N) throw DimensionError("input stream shorter than state stream");
  OnlineRun run;
  const double t0 = now_us();
  for (Index k = k0; k < N; ++k) {
    if (k > k0) learner.push(Snapshot{k, Xs.col(k), Us.col(k)});
    PredictionRow row;
    row.k = k + 1;
    row.x_true = Xs.col(k + 1);
    row.x_pred = learner.predict(k, Xs.col(k), Us.col(k));
    run.predictions.push_back(std::move(row));
  }
  run.online_wall_us = now_us() - t0;
  run.model = learner.model();
  run.updates = learner.log();
  run.max_retained = learner.max_retained();
  return run;
}

void write_update_log_csv(const std::string& path, const std::vector<UpdateRecord>& log) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << "tau,accepted,reason,err_before,err_after,wall_us\n"
    << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : log)
    f << r.tau << ',' << (r.accepted ? 1 : 0) << ',' << reason_name(r.reason) << ',' << r.err_before << ','
      << r.err_after << ',' << r.wall_us << '\n';
}

void write_prediction_log_csv(const std::string& path, const std::vector<PredictionRow>& rows) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  const Index n = rows.empty() ? 0 : rows.front().x_true.size();
  f << 'k';
  for (Index i = 1; i <= n; ++i) f << ",x_true" << i;
  for (Index i = 1; i <= n; ++i) f << ",x_pred" << i;
  f << ",abs_err\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows) {
    f << r.k;
    for (Index i = 0; i < n; ++i) f << ',' << r.x_true(i);
    for (Index i = 0; i < n; ++i) f << ',' << r.x_pred(i);
    f << ',' << (r.x_true - r.x_pred).norm() << '\n';
  }
}

}  // namespace tvk
