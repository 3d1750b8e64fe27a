#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "tvk/errors.hpp"
#include "tvk/qp.hpp"
#include "tvk/sdp.hpp"

namespace tvk {
namespace {

TEST(Lmi, TwoByTwoLowerBound) {
  // [[y, 1], [1, y]] >= 0 holds iff y >= 1.
  LmiProblem p;
  const int b = p.add_block((Mat(2, 2) << 0, 1, 1, 0).finished());
  const int y = p.add_var(1.0);
  p.add_entry(y, b, 0, 0, 1.0);
  p.add_entry(y, b, 1, 1, 1.0);
  const SdpSolution s = solve_lmi(p);
  ASSERT_EQ(s.status, SdpStatus::Optimal);
  EXPECT_NEAR(s.y(0), 1.0, 1e-6);
  EXPECT_NEAR(s.objective, 1.0, 1e-6);
}

TEST(Lmi, LargestEigenvalue) {
  std::mt19937_64 rng(4);
  const Mat G = test::random_matrix(5, 5, rng);
  const Mat M = 0.5 * (G + G.transpose());
  LmiProblem p;
  const int b = p.add_block(-M);
  const int t = p.add_var(1.0);
  for (Index i = 0; i < 5; ++i) p.add_entry(t, b, i, i, 1.0);
  EXPECT_EQ(p.coefficient(t, b), Mat::Identity(5, 5));
  const SdpSolution s = solve_lmi(p);
  ASSERT_EQ(s.status, SdpStatus::Optimal);
  const double lmax = Eigen::SelfAdjointEigenSolver<Mat>(M).eigenvalues().maxCoeff();
  EXPECT_NEAR(s.y(0), lmax, 1e-6 * (1.0 + std::abs(lmax)));
  EXPECT_GE(s.min_eig, -1e-8);
}

TEST(Lmi, ContradictoryBlocksAreInfeasible) {
  // y >= 0 and -y - 1 >= 0.
  LmiProblem p;
  const int b0 = p.add_block(Mat::Zero(1, 1));
  const int b1 = p.add_block(Mat::Constant(1, 1, -1.0));
  const int y = p.add_var(0.0);
  p.add_entry(y, b0, 0, 0, 1.0);
  p.add_entry(y, b1, 0, 0, -1.0);
  const SdpSolution s = solve_lmi(p);
  EXPECT_EQ(s.status, SdpStatus::Infeasible);
}

TEST(Lmi, EvaluateIsAffine) {
  LmiProblem p;
  const int b = p.add_block(Mat::Identity(3, 3));
  const int y0 = p.add_var(1.0), y1 = p.add_var(0.0);
  p.add_entry(y0, b, 0, 1, 2.0);
  p.add_entry(y1, b, 2, 2, -1.0);
  Mat expect = Mat::Identity(3, 3);
  expect(0, 1) = expect(1, 0) = 2.0 * 0.5;
  expect(2, 2) = 1.0 - 3.0;
  EXPECT_LT((p.evaluate((Vec(2) << 0.5, 3.0).finished(), b) - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(p.evaluate(Vec::Zero(3), b), DimensionError);
}

void expect_kkt(const Mat& H, const Vec& f, const Vec& lo, const Vec& hi, const BoxQpResult& r) {
  ASSERT_TRUE(r.converged);
  const Vec grad = H * r.x + f;
  const double tol = 1e-8 * (1.0 + grad.cwiseAbs().maxCoeff());
  for (Index i = 0; i < r.x.size(); ++i) {
    EXPECT_GE(r.x(i), lo(i) - 1e-12);
    EXPECT_LE(r.x(i), hi(i) + 1e-12);
    if (r.active(i) < 0) EXPECT_GE(grad(i), -tol);
    else if (r.active(i) > 0) EXPECT_LE(grad(i), tol);
    else EXPECT_NEAR(grad(i), 0.0, tol);
    EXPECT_GE(r.multipliers(i), -tol);
  }
  EXPECT_NEAR(r.objective, 0.5 * r.x.dot(H * r.x) + f.dot(r.x), 1e-10 * (1.0 + std::abs(r.objective)));
}

TEST(BoxQp, SatisfiesKktOnRandomInstances) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 3 + trial % 8;
    const Mat G = test::random_matrix(n, n, rng);
    const Mat H = G * G.transpose() + 0.1 * Mat::Identity(n, n);
    const Vec f = test::random_vector(n, rng, 3.0);
    const Vec lo = Vec::Constant(n, -0.5), hi = Vec::Constant(n, 0.7);
    expect_kkt(H, f, lo, hi, solve_box_qp(H, f, lo, hi));
  }
}

TEST(BoxQp, DiagonalProblemIsClipped) {
  const Mat H = Vec::Constant(3, 2.0).asDiagonal();
  const Vec f = (Vec(3) << -10, 0.5, 10).finished();  // unconstrained x = (5, -0.25, -5)
  const Vec lo = Vec::Constant(3, -1.0), hi = Vec::Constant(3, 1.0);
  const BoxQpResult r = solve_box_qp(H, f, lo, hi);
  EXPECT_NEAR(r.x(0), 1.0, 1e-14);
  EXPECT_NEAR(r.x(1), -0.25, 1e-14);
  EXPECT_NEAR(r.x(2), -1.0, 1e-14);
  EXPECT_EQ(r.active(0), 1);
  EXPECT_EQ(r.active(1), 0);
  EXPECT_EQ(r.active(2), -1);
  EXPECT_NEAR(r.multipliers(0), 8.0, 1e-12);
}

TEST(BoxQp, WarmStartReachesSameOptimum) {
  std::mt19937_64 rng(12);
  const Mat G = test::random_matrix(6, 6, rng);
  const Mat H = G * G.transpose() + Mat::Identity(6, 6);
  const Vec f = test::random_vector(6, rng, 4.0);
  const Vec lo = Vec::Constant(6, -1.0), hi = Vec::Constant(6, 1.0);
  const Vec x0 = Vec::Constant(6, 5.0);
  const BoxQpResult a = solve_box_qp(H, f, lo, hi), b = solve_box_qp(H, f, lo, hi, &x0);
  EXPECT_LT((a.x - b.x).cwiseAbs().maxCoeff(), 1e-10);
}

}  // namespace
}  // namespace tvk
