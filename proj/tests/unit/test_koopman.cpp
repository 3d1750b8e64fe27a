#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <Eigen/SVD>

#include "helpers.hpp"
#include "tvk/errors.hpp"
#include "tvk/koopman.hpp"

namespace tvk {
namespace {

struct LinearData {
  Mat A, B, X, U;
};

LinearData linear_stream(Index n, Index m, Index N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LinearData d;
  d.A = test::random_matrix(n, n, rng, 0.3);
  d.B = test::random_matrix(n, m, rng);
  d.U = test::random_matrix(m, N, rng);
  d.X.resize(n, N + 1);
  d.X.col(0) = test::random_vector(n, rng);
  for (Index k = 0; k < N; ++k) d.X.col(k + 1) = d.A * d.X.col(k) + d.B * d.U.col(k);
  return d;
}

std::shared_ptr<const Observable> identity_obs(Index n) {
  return std::make_shared<const Observable>(Observable::identity(n));
}

TEST(Edmd, RecoversLinearSystemExactly) {
  const LinearData d = linear_stream(4, 2, 40, 1);
  const DataMatrices D = data_from_trajectory(d.X, d.U, 0, 40, Observable::identity(4));
  const auto [A, B] = solve_batch(D);
  EXPECT_LT((A - d.A).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((B - d.B).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((solve_decoder(D) - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(edmd_loss(A, B, solve_decoder(D), D), 1e-18);
}

TEST(Edmd, SquareRegressorInterpolates) {
  // w = r + m: [G;U] is square and invertible, so the fit interpolates any targets.
  std::mt19937_64 rng(2);
  DataMatrices D;
  D.G = test::random_matrix(3, 5, rng);
  D.U = test::random_matrix(2, 5, rng);
  D.H = test::random_matrix(3, 5, rng);
  D.X = D.G;
  D.Y = test::random_matrix(3, 5, rng);
  const auto [A, B] = solve_batch(D);
  EXPECT_LT((A * D.G + B * D.U - D.H).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Edmd, MatchesSvdPseudoInverse) {
  std::mt19937_64 rng(3);
  DataMatrices D;
  D.G = test::random_matrix(4, 30, rng);
  D.U = test::random_matrix(1, 30, rng);
  D.H = test::random_matrix(4, 30, rng);
  D.X = D.G;
  D.Y = D.H.topRows(2);
  const Mat Z = stack_regressors(D);
  Eigen::JacobiSVD<Mat> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Mat pinv = svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  const Mat AB = D.H * pinv;
  const auto [A, B] = solve_batch(D);
  EXPECT_LT((A - AB.leftCols(4)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((B - AB.rightCols(1)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Edmd, RidgeMatchesNormalEquations) {
  std::mt19937_64 rng(4);
  DataMatrices D;
  D.G = test::random_matrix(3, 12, rng);
  D.U = test::random_matrix(2, 12, rng);
  D.H = test::random_matrix(3, 12, rng);
  D.X = D.G;
  D.Y = test::random_matrix(2, 12, rng);
  const double lambda = 0.7;
  const Mat Z = stack_regressors(D);
  const Mat gz = Z * Z.transpose() + lambda * Mat::Identity(5, 5);
  const Mat AB = D.H * Z.transpose() * gz.inverse();
  const auto [A, B] = solve_batch(D, lambda);
  EXPECT_LT((A - AB.leftCols(3)).cwiseAbs().maxCoeff(), 1e-12);
  const auto [P, Pbar] = init_grams(D, lambda);
  EXPECT_LT((P - gz.inverse()).cwiseAbs().maxCoeff(), 1e-12);
  const Mat gh = D.H * D.H.transpose() + lambda * Mat::Identity(3, 3);
  EXPECT_LT((Pbar - gh.inverse()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Edmd, RankDeficientWithoutRidgeThrows) {
  std::mt19937_64 rng(5);
  DataMatrices D;
  D.G = test::random_matrix(3, 10, rng);
  D.G.row(2) = D.G.row(0);
  D.U = test::random_matrix(1, 10, rng);
  D.H = test::random_matrix(3, 10, rng);
  D.X = D.G;
  D.Y = D.H;
  EXPECT_THROW(solve_batch(D), RankError);
  EXPECT_NO_THROW(solve_batch(D, 1e-3));
  EXPECT_THROW(solve_batch(D, -1.0), DimensionError);
}

TEST(Edmd, LossTrivialCases) {
  std::mt19937_64 rng(6);
  DataMatrices D;
  D.G = test::random_matrix(2, 5, rng);
  D.U = test::random_matrix(1, 5, rng);
  D.H = test::random_matrix(2, 5, rng);
  D.X = D.G;
  D.Y = test::random_matrix(2, 5, rng);
  // All-zero operators leave both residuals at their targets.
  EXPECT_NEAR(edmd_loss(Mat::Zero(2, 2), Mat::Zero(2, 1), Mat::Zero(2, 2), D),
              D.Y.squaredNorm() + D.H.squaredNorm(), 1e-12);
  // Exact operators give zero loss.
  DataMatrices E = D;
  const Mat A = test::random_matrix(2, 2, rng), B = test::random_matrix(2, 1, rng), C = test::random_matrix(2, 2, rng);
  E.H = A * E.G + B * E.U;
  E.Y = C * E.H;
  EXPECT_NEAR(edmd_loss(A, B, C, E), 0.0, 1e-24);
}

TEST(Model, FixedDecoderSelectsState) {
  const LinearData d = linear_stream(2, 1, 30, 7);
  auto obs = std::make_shared<const Observable>(Observable::network(glorot_init(MlpSpec{{2, 6, 3}}, 3), true));
  const DataMatrices D = data_from_trajectory(d.X, d.U, 0, 30, *obs);
  const LiftedModel M = fit_model(D, obs, 1e-6, true);
  EXPECT_EQ(M.C, concat_decoder(2, 5));
  EXPECT_EQ(M.r(), 5);
  auto plain = std::make_shared<const Observable>(Observable::network(glorot_init(MlpSpec{{2, 6, 3}}, 3), false));
  EXPECT_THROW(fit_model(data_from_trajectory(d.X, d.U, 0, 30, *plain), plain, 1e-6, true), DimensionError);
}

TEST(Model, RolloutClosedForm) {
  LiftedModel M;
  M.A = Mat::Identity(2, 2) * 0.5;
  M.B = Mat::Ones(2, 1);
  M.C = Mat::Identity(2, 2);
  M.P = Mat::Identity(3, 3);
  M.Pbar = Mat::Identity(2, 2);
  M.obs = identity_obs(2);
  const Vec x0 = Vec::Constant(2, 8.0);
  const Mat U = Mat::Ones(1, 4);
  const Mat R = predict_rollout(M, x0, U, 4);
  // x_k = 0.5^k x0 + 2 (1 - 0.5^k)
  for (Index k = 0; k <= 4; ++k) {
    const double expect = std::pow(0.5, k) * 8.0 + 2.0 * (1.0 - std::pow(0.5, k));
    EXPECT_NEAR(R(0, k), expect, 1e-14);
  }
  EXPECT_LT((predict_rollout(M, x0, U, 4, RolloutMode::Relift) - R).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((predict_step(M, x0, Vec(U.col(0))) - R.col(1)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(predict_rollout(M, x0, U, 5), DimensionError);
}

TEST(Model, SaveLoadIsBitExact) {
  const LinearData d = linear_stream(2, 1, 40, 9);
  auto obs = std::make_shared<const Observable>(Observable::network(glorot_init(MlpSpec{{2, 8, 4}}, 5), true));
  LiftedModel M = fit_model(data_from_trajectory(d.X, d.U, 0, 40, *obs), obs, 1e-4);
  M.tau = 17;
  const auto dir = std::filesystem::temp_directory_path() / "tvk_model_roundtrip";
  std::filesystem::create_directories(dir);
  save_checkpoint((dir / "theta.json").string(), *obs);
  save_model((dir / "model.bin").string(), M, "theta.json");
  std::string ref;
  const LiftedModel L = load_model((dir / "model.bin").string(), &ref);
  EXPECT_EQ(ref, "theta.json");
  EXPECT_EQ(L.A, M.A);
  EXPECT_EQ(L.B, M.B);
  EXPECT_EQ(L.C, M.C);
  EXPECT_EQ(L.P, M.P);
  EXPECT_EQ(L.Pbar, M.Pbar);
  EXPECT_EQ(L.tau, 17);
  EXPECT_EQ(L.lambda, 1e-4);
  EXPECT_TRUE(*L.obs == *obs);
  std::filesystem::remove_all(dir);
}

TEST(Model, LoadRejectsForeignFile) {
  const auto path = (std::filesystem::temp_directory_path() / "tvk_not_a_model.bin").string();
  std::ofstream(path) << "hello world, not a model";
  EXPECT_THROW(load_model(path), Error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace tvk
