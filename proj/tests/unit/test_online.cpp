#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "tvk/errors.hpp"
#include "tvk/online.hpp"

namespace tvk {
namespace {

using test::push_range;

struct Stream {
  Mat X, U;
};

// x_{k+1} = A_k x_k + B u_k with slowly rotating A_k.
Stream ltv_stream(Index N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Stream s;
  s.U = test::random_matrix(1, N, rng);
  s.X.resize(2, N + 1);
  s.X.col(0) << 1.0, -0.5;
  Vec B(2);
  B << 0.0, 1.0;
  for (Index k = 0; k < N; ++k) {
    const double th = 0.3 + 0.002 * static_cast<double>(k);
    Mat A(2, 2);
    A << 0.9 * std::cos(th), -0.9 * std::sin(th), 0.9 * std::sin(th), 0.9 * std::cos(th);
    s.X.col(k + 1) = A * s.X.col(k) + B * s.U(0, k);
  }
  return s;
}

LiftedModel initial_model(const TrajectoryBuffer& buf, std::shared_ptr<const Observable> obs, double lambda) {
  return fit_model(assemble_data_matrices(buf, *obs), obs, lambda);
}

std::shared_ptr<const Observable> net_obs() {
  return std::make_shared<const Observable>(Observable::network(glorot_init(MlpSpec{{2, 10, 4}}, 21), true));
}

TEST(LowRankUpdate, MatchesRefitOfAdvancedWindow) {
  const Stream s = ltv_stream(80, 1);
  const auto obs = net_obs();
  const double lambda = 1e-3;
  TrajectoryBuffer buf(2, 1, 30, 5);
  push_range(buf, s.X, s.U, 0, 30);
  LiftedModel M = initial_model(buf, obs, lambda);
  Index next = 31;
  for (int u = 0; u < 6; ++u) {
    push_range(buf, s.X, s.U, next, next + 4);
    next += 5;
    const UpdateBatch batch = form_update_batch(buf, *obs);
    ASSERT_TRUE(feasibility_check(M, batch));
    M = apply_update(M, batch);
    buf.advance();
    const LiftedModel R = initial_model(buf, obs, lambda);
    const double scale = 1.0 + R.AB().cwiseAbs().maxCoeff();
    EXPECT_LT((M.AB() - R.AB()).cwiseAbs().maxCoeff(), 1e-8 * scale) << "update " << u;
    EXPECT_LT((M.C - R.C).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + R.C.cwiseAbs().maxCoeff()));
    EXPECT_LT((M.P - R.P).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + R.P.cwiseAbs().maxCoeff()));
  }
  EXPECT_EQ(M.tau, 6);
}

TEST(LowRankUpdate, ZeroInnovationLeavesOperatorsUnchanged) {
  std::mt19937_64 rng(2);
  LiftedModel M;
  M.A = test::random_matrix(3, 3, rng, 0.3);
  M.B = test::random_matrix(3, 1, rng);
  M.C = test::random_matrix(2, 3, rng);
  const Mat Zg = test::random_matrix(4, 20, rng);
  M.P = (Zg * Zg.transpose() + Mat::Identity(4, 4)).inverse();
  const Mat Hg = test::random_matrix(3, 20, rng);
  M.Pbar = (Hg * Hg.transpose() + Mat::Identity(3, 3)).inverse();
  M.obs = std::make_shared<const Observable>(Observable::identity(3));
  UpdateBatch batch;
  batch.Z = test::random_matrix(4, 4, rng);
  batch.W = M.AB() * batch.Z;
  batch.V = M.C * batch.W;
  batch.E = (Vec(4) << -1, -1, 1, 1).finished();
  batch.b = 2;
  const LiftedModel N = apply_update(M, batch);
  EXPECT_LT((N.AB() - M.AB()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((N.C - M.C).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_FALSE((N.P - M.P).isZero(1e-12));
}

TEST(Feasibility, DetectsSingularSmallSystem) {
  LiftedModel M;
  M.A = Mat::Zero(2, 2);
  M.B = Mat::Zero(2, 1);
  M.C = Mat::Identity(2, 2);
  M.P = Mat::Identity(3, 3);
  M.Pbar = Mat::Identity(2, 2);
  M.obs = std::make_shared<const Observable>(Observable::identity(2));
  UpdateBatch batch;
  batch.Z = Mat::Zero(3, 2);
  batch.Z(0, 0) = 1.0;  // outgoing column of unit P-norm, zero incoming column
  batch.W = Mat::Identity(2, 2);
  batch.V = batch.W;
  batch.E = (Vec(2) << -1, 1).finished();
  const Feasibility f = feasibility_check(M, batch);
  EXPECT_FALSE(f.ok);
  EXPECT_LT(f.dynamics_ratio, 1e-12);
  batch.Z(0, 0) = 0.5;
  batch.W *= 0.5;
  EXPECT_TRUE(feasibility_check(M, batch).ok);
}

TEST(Feasibility, RejectsMismatchedBatch) {
  const Stream s = ltv_stream(40, 3);
  const auto obs = net_obs();
  TrajectoryBuffer buf(2, 1, 20, 4);
  push_range(buf, s.X, s.U, 0, 24);
  const LiftedModel M = initial_model(buf, obs, 1e-3);
  UpdateBatch batch = form_update_batch(buf, *obs);
  batch.E = Vec::Ones(3);
  EXPECT_THROW(feasibility_check(M, batch), DimensionError);
}

LiftedModel scalar_model(double a, double b) {
  LiftedModel M;
  M.A = Mat::Constant(1, 1, a);
  M.B = Mat::Constant(1, 1, b);
  M.C = Mat::Identity(1, 1);
  M.P = Mat::Identity(2, 2);
  M.Pbar = Mat::Identity(1, 1);
  M.obs = std::make_shared<const Observable>(Observable::identity(1));
  return M;
}

TEST(Gates, FittingErrorAndThresholds) {
  const LiftedModel M = scalar_model(0.5, 1.0);
  const Mat X = (Mat(1, 2) << 2.0, 4.0).finished();
  const Mat U = (Mat(1, 2) << 1.0, 0.0).finished();
  const Mat Y = (Mat(1, 2) << 2.5, 2.0).finished();  // residuals 0.5 and 0
  EXPECT_DOUBLE_EQ(fitting_error(M, X, U, Y), 0.25);
  EXPECT_TRUE(gate_epsilon(M, X, U, Y, 0.25));
  EXPECT_FALSE(gate_epsilon(M, X, U, Y, 0.2));
  EXPECT_THROW(gate_epsilon(M, X, U, Y, -1.0), DimensionError);
  const LiftedModel exact = scalar_model(0.5, 1.5);  // residuals 0 and 0
  EXPECT_TRUE(gate_improvement(M, exact, X, U, Y));
  EXPECT_FALSE(gate_improvement(exact, M, X, U, Y));
  EXPECT_TRUE(gate_improvement(M, M, X, U, Y));
}

TEST(ErrorBound, AffineInEachInput) {
  const LiftedModel M = scalar_model(-0.8, 2.0);
  ErrorBoundInputs in{0.1, 0.2, 3.0, 0.05};
  // (|CA| mu_g + 1) mu_x + |CB| mu_u + E
  EXPECT_NEAR(error_bound(in, M), (0.8 * 3.0 + 1.0) * 0.1 + 2.0 * 0.2 + 0.05, 1e-15);
  ErrorBoundInputs twice = in;
  twice.mu_u *= 2.0;
  EXPECT_NEAR(error_bound(twice, M) - error_bound(in, M), 2.0 * 0.2, 1e-15);
  EXPECT_NEAR(error_bound(ErrorBoundInputs{}, M), 0.0, 0.0);
  in.mu_x = -1.0;
  EXPECT_THROW(error_bound(in, M), DimensionError);
}

TEST(ErrorBound, MeasuredInputsOnStaticPlant) {
  // x_{k+1} = x_k and constant input: every increment and reconstruction error is zero.
  std::deque<Transition> win;
  for (int k = 0; k < 5; ++k) win.push_back(Transition{k, Vec::Constant(1, 3.0), Vec::Constant(1, 0.5), Vec::Constant(1, 3.0)});
  const ErrorBoundInputs in = measure_bound_inputs(win, scalar_model(1.0, 0.0), 1.0);
  EXPECT_EQ(in.mu_x, 0.0);
  EXPECT_EQ(in.mu_u, 0.0);
  EXPECT_EQ(in.e_recon, 0.0);
  EXPECT_EQ(error_bound(in, scalar_model(1.0, 0.0)), 0.0);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::Otvdkl, Method::OtvdklGated, Method::FixedDko, Method::AccumulateOnly})
    EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_THROW(parse_method("edmd"), ConfigError);
  const OnlineConfig g = OnlineConfig::for_method(Method::OtvdklGated, 30, 10, 0.1);
  EXPECT_TRUE(g.epsilon_gate && g.improvement_gate);
  const OnlineConfig p = OnlineConfig::for_method(Method::Otvdkl, 30, 10, 0.1);
  EXPECT_FALSE(p.epsilon_gate || p.improvement_gate);
}

TEST(Learner, FixedMethodNeverUpdates) {
  const Stream s = ltv_stream(200, 4);
  const auto obs = net_obs();
  TrajectoryBuffer buf(2, 1, 30, 10);
  push_range(buf, s.X, s.U, 0, 30);
  const LiftedModel M0 = initial_model(buf, obs, 1e-3);
  OnlineLearner L(M0, buf, OnlineConfig::for_method(Method::FixedDko, 30, 10, 0.0));
  const OnlineRun run = run_online_learning(L, s.X, s.U, 30);
  EXPECT_EQ(run.model->AB(), M0.AB());
  EXPECT_TRUE(run.updates.empty());
  EXPECT_EQ(run.predictions.size(), 170u);
  EXPECT_LE(run.max_retained, 41u);
}

TEST(Learner, SlidingWindowTracksDrift) {
  const Stream s = ltv_stream(400, 5);
  const auto obs = std::make_shared<const Observable>(Observable::identity(2));
  TrajectoryBuffer buf(2, 1, 30, 10);
  push_range(buf, s.X, s.U, 0, 30);
  const LiftedModel M0 = initial_model(buf, obs, 1e-6);
  OnlineLearner online(M0, buf, OnlineConfig::for_method(Method::Otvdkl, 30, 10, 0.0));
  OnlineLearner fixed(M0, buf, OnlineConfig::for_method(Method::FixedDko, 30, 10, 0.0));
  const OnlineRun a = run_online_learning(online, s.X, s.U, 30);
  const OnlineRun b = run_online_learning(fixed, s.X, s.U, 30);
  double ea = 0.0, eb = 0.0;
  for (std::size_t i = 200; i < a.predictions.size(); ++i) {
    ea += (a.predictions[i].x_pred - a.predictions[i].x_true).norm();
    eb += (b.predictions[i].x_pred - b.predictions[i].x_true).norm();
  }
  EXPECT_LT(ea, 0.2 * eb);
  EXPECT_GT(online.accepted(), 30);
  EXPECT_LE(a.max_retained, 41u);
}

TEST(Learner, EpsilonGateSkipsPerfectFit) {
  // Time-invariant plant: after the first fit the model is exact, so a positive epsilon skips everything.
  std::mt19937_64 rng(6);
  Mat X(2, 101), U = test::random_matrix(1, 100, rng);
  Mat A(2, 2);
  A << 0.7, 0.2, -0.1, 0.5;
  X.col(0) << 1, 1;
  for (Index k = 0; k < 100; ++k) X.col(k + 1) = A * X.col(k) + Vec::Constant(2, U(0, k));
  const auto obs = std::make_shared<const Observable>(Observable::identity(2));
  TrajectoryBuffer buf(2, 1, 20, 5);
  push_range(buf, X, U, 0, 20);
  OnlineLearner L(initial_model(buf, obs, 1e-9), buf, OnlineConfig::for_method(Method::OtvdklGated, 20, 5, 1e-6));
  run_online_learning(L, X, U, 20);
  ASSERT_FALSE(L.log().empty());
  for (const auto& r : L.log()) EXPECT_EQ(r.reason, Reason::EpsilonGate);
  EXPECT_EQ(L.accepted(), 0);
}

}  // namespace
}  // namespace tvk
