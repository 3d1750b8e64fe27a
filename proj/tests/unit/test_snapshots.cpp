#include <gtest/gtest.h>

#include <filesystem>

#include "helpers.hpp"
#include "tvk/errors.hpp"
#include "tvk/lifting.hpp"
#include "tvk/snapshots.hpp"

namespace tvk {
namespace {

using test::push_range;

Snapshot snap(std::int64_t k, Index n = 2, Index m = 1) {
  return Snapshot{k, Vec::Constant(n, static_cast<double>(k)), Vec::Constant(m, 0.5 * static_cast<double>(k))};
}

TEST(TrajectoryBuffer, FirstPushCountsAsNew) {
  TrajectoryBuffer buf(2, 1, 3, 1);
  buf.push(snap(0));
  EXPECT_EQ(buf.retained(), 1u);
  EXPECT_EQ(buf.new_count(), 1);
  EXPECT_FALSE(buf.window_formed());
}

TEST(TrajectoryBuffer, RejectsIndexGap) {
  TrajectoryBuffer buf(2, 1, 30, 10);
  for (int k = 0; k <= 9; ++k) buf.push(snap(k));
  EXPECT_THROW(buf.push(snap(11)), SequencingError);
}

TEST(TrajectoryBuffer, RejectsWrongLengths) {
  TrajectoryBuffer buf(2, 1, 3, 1);
  EXPECT_THROW(buf.push(Snapshot{0, Vec::Zero(3), Vec::Zero(1)}), DimensionError);
  EXPECT_THROW(buf.push(Snapshot{0, Vec::Zero(2), Vec::Zero(2)}), DimensionError);
}

TEST(TrajectoryBuffer, RejectsBatchLargerThanWindow) {
  EXPECT_THROW(TrajectoryBuffer(2, 1, 3, 4), DimensionError);
  EXPECT_THROW(TrajectoryBuffer(2, 1, 3, 0), DimensionError);
}

TEST(TrajectoryBuffer, NewCountAfterFortyOnePushes) {
  TrajectoryBuffer buf(2, 1, 30, 10);
  for (int k = 0; k <= 40; ++k) buf.push(snap(k));
  EXPECT_TRUE(buf.window_formed());
  EXPECT_EQ(buf.window_start(), 0);
  EXPECT_EQ(buf.window().size(), 30u);
  EXPECT_EQ(buf.new_count(), 10);
  EXPECT_TRUE(buf.batch_ready());
}

TEST(TrajectoryBuffer, AdvanceMovesWindowByB) {
  TrajectoryBuffer buf(2, 1, 30, 10);
  for (int k = 0; k <= 40; ++k) buf.push(snap(k));
  buf.advance();
  EXPECT_EQ(buf.window_start(), 10);
  EXPECT_EQ(buf.window().size(), 30u);
  EXPECT_EQ(buf.new_count(), 0);
  EXPECT_EQ(buf.window().back().k, 39);
  EXPECT_EQ(*buf.last_index(), 40);
}

TEST(TrajectoryBuffer, RetainedNeverExceedsBound) {
  const Index w = 7, b = 3;
  TrajectoryBuffer buf(2, 1, w, b);
  std::size_t worst = 0;
  for (int k = 0; k < 200; ++k) {
    buf.push(snap(k));
    worst = std::max(worst, buf.retained());
    if (buf.batch_ready()) {
      if (k % 3 == 0) buf.discard_new();
      else buf.advance();
    }
    worst = std::max(worst, buf.retained());
  }
  EXPECT_LE(worst, static_cast<std::size_t>(w + b + 1));
}

TEST(TrajectoryBuffer, AmendLatestInput) {
  TrajectoryBuffer buf(2, 1, 3, 1);
  buf.push(snap(0));
  buf.amend_latest_input(Vec::Constant(1, 7.0));
  buf.push(snap(1));
  buf.push(snap(2));
  buf.push(snap(3));
  EXPECT_DOUBLE_EQ(buf.window().front().u(0), 7.0);
}

TEST(DataMatrices, DefinitionUnrolled) {
  // w = 2, states x0..x2, inputs u0..u1.
  Mat X(2, 3), U(1, 3);
  X << 1, 2, 3, 4, 5, 6;
  U << 10, 20, 0;
  TrajectoryBuffer buf(2, 1, 2, 1);
  push_range(buf, X, U, 0, 2);
  const Observable g = Observable::identity(2);
  const DataMatrices D = assemble_data_matrices(buf, g);
  EXPECT_EQ(D.X, X.leftCols(2));
  EXPECT_EQ(D.Y, X.rightCols(2));
  EXPECT_EQ(D.U, U.leftCols(2));
  EXPECT_EQ(D.G, D.X);
  EXPECT_EQ(D.H, D.Y);
}

TEST(DataMatrices, NetworkColumnsMatchPerColumnForward) {
  std::mt19937_64 rng(3);
  const MlpParams net = glorot_init(MlpSpec{{3, 8, 5}}, 11);
  const Observable g = Observable::network(net, false);
  const Mat X = test::random_matrix(3, 6, rng);
  const Mat U = test::random_matrix(1, 6, rng);
  TrajectoryBuffer buf(3, 1, 5, 1);
  push_range(buf, X, U, 0, 5);
  const DataMatrices D = assemble_data_matrices(buf, g);
  for (Index j = 0; j < 5; ++j) {
    EXPECT_LT((D.G.col(j) - mlp_forward(net, Vec(X.col(j)))).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((D.H.col(j) - mlp_forward(net, Vec(X.col(j + 1)))).cwiseAbs().maxCoeff(), 1e-14);
  }
  // Shift structure.
  EXPECT_EQ(D.Y.leftCols(4), D.X.rightCols(4));
}

TEST(DataMatrices, AssemblyIsIdempotent) {
  std::mt19937_64 rng(5);
  const Mat X = test::random_matrix(2, 12, rng), U = test::random_matrix(1, 12, rng);
  TrajectoryBuffer buf(2, 1, 10, 2);
  push_range(buf, X, U, 0, 10);
  const Observable g = Observable::identity(2);
  const DataMatrices a = assemble_data_matrices(buf, g), b = assemble_data_matrices(buf, g);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.H, b.H);
}

TEST(UpdateBatch, IndexArithmeticForSingleColumnBatch) {
  Mat X(1, 6), U(1, 6);
  X << 0, 1, 2, 3, 4, 5;
  U << 10, 11, 12, 13, 14, 15;
  TrajectoryBuffer buf(1, 1, 3, 1);
  push_range(buf, X, U, 0, 4);
  const UpdateBatch B = form_update_batch(buf, Observable::identity(1));
  ASSERT_EQ(B.Z.cols(), 2);
  EXPECT_DOUBLE_EQ(B.Z(0, 0), 0.0);   // g(x_0)
  EXPECT_DOUBLE_EQ(B.Z(1, 0), 10.0);  // u_0
  EXPECT_DOUBLE_EQ(B.Z(0, 1), 3.0);   // g(x_3)
  EXPECT_DOUBLE_EQ(B.Z(1, 1), 13.0);
  EXPECT_DOUBLE_EQ(B.W(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(B.W(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(B.V(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(B.V(0, 1), 4.0);
}

TEST(UpdateBatch, SignatureMatrix) {
  std::mt19937_64 rng(1);
  const Mat X = test::random_matrix(2, 10, rng), U = test::random_matrix(1, 10, rng);
  TrajectoryBuffer buf(2, 1, 4, 2);
  push_range(buf, X, U, 0, 6);
  const UpdateBatch B = form_update_batch(buf, Observable::identity(2));
  Vec expected(4);
  expected << -1, -1, 1, 1;
  EXPECT_EQ(B.E, expected);
  EXPECT_EQ(B.E.cwiseProduct(B.E), Vec::Ones(4));
  const UpdateBatch A = form_update_batch(buf, Observable::identity(2), BatchMode::Accumulate);
  EXPECT_EQ(A.E, Vec::Ones(2));
  EXPECT_EQ(A.Z.cols(), 2);
}

TEST(UpdateBatch, NotReadySignalsCapacity) {
  TrajectoryBuffer buf(2, 1, 4, 2);
  for (int k = 0; k <= 5; ++k) buf.push(snap(k));
  EXPECT_THROW(form_update_batch(buf, Observable::identity(2)), CapacityError);
}

TEST(UpdateBatch, GramUpdateEqualsAdvancedWindow) {
  std::mt19937_64 rng(9);
  const Index n = 3, m = 2, w = 8, b = 3;
  const Mat X = test::random_matrix(n, w + b + 1, rng), U = test::random_matrix(m, w + b + 1, rng);
  TrajectoryBuffer buf(n, m, w, b);
  push_range(buf, X, U, 0, w + b);
  const Observable g = Observable::identity(n);
  const DataMatrices before = assemble_data_matrices(buf, g);
  const UpdateBatch B = form_update_batch(buf, g);
  buf.advance();
  const DataMatrices after = assemble_data_matrices(buf, g);
  Mat Zb(n + m, w), Za(n + m, w);
  Zb << before.G, before.U;
  Za << after.G, after.U;
  const Mat lhs = Za * Za.transpose();
  const Mat rhs = Zb * Zb.transpose() + B.Z * B.E.asDiagonal() * B.Z.transpose();
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + lhs.cwiseAbs().maxCoeff()));
}

TEST(LiftCache, ReturnsLiftAndDropsDeadEntries) {
  const Observable g = Observable::identity(2);
  LiftCache cache(&g);
  TrajectoryBuffer buf(2, 1, 2, 1);
  for (int k = 0; k <= 5; ++k) {
    buf.push(snap(k));
    EXPECT_EQ(cache.get(k, snap(k).x), snap(k).x);
    if (buf.batch_ready()) buf.advance();
  }
  cache.retain_live(buf);
  EXPECT_LE(cache.size(), buf.retained());
}

TEST(TrajectoryCsv, RoundTrip) {
  std::vector<Snapshot> s;
  for (int k = 0; k < 5; ++k) s.push_back(Snapshot{k, Vec::Constant(2, 0.1 * k + 1.0 / 3.0), Vec::Constant(1, -k / 7.0)});
  const auto path = (std::filesystem::temp_directory_path() / "tvk_traj_roundtrip.csv").string();
  write_trajectory_csv(path, s);
  const auto r = read_trajectory_csv(path, 2, 1);
  ASSERT_EQ(r.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(r[i].k, s[i].k);
    EXPECT_EQ(r[i].x, s[i].x);
    EXPECT_EQ(r[i].u, s[i].u);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace tvk
