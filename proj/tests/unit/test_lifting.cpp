#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "tvk/errors.hpp"
#include "tvk/lifting.hpp"

namespace tvk {
namespace {

// Scalar-loop forward pass used as an independent oracle.
Vec naive_forward(const MlpParams& p, const Vec& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    std::vector<double> z(static_cast<std::size_t>(p.W[l].rows()));
    for (Index i = 0; i < p.W[l].rows(); ++i) {
      double s = p.b[l](i);
      for (Index j = 0; j < p.W[l].cols(); ++j) s += p.W[l](i, j) * a[static_cast<std::size_t>(j)];
      const bool hidden = l + 1 < p.W.size();
      z[static_cast<std::size_t>(i)] = hidden ? std::max(0.0, s) : s;
    }
    a = z;
  }
  return Eigen::Map<Vec>(a.data(), static_cast<Index>(a.size()));
}

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  const MlpParams p = MlpParams::zeros(MlpSpec{{3, 16, 16, 5}});
  const Vec y = mlp_forward(p, Vec(Vec::Constant(3, 2.5)));
  EXPECT_EQ(y, Vec::Zero(5));
}

TEST(Mlp, PassThroughHiddenLayerIsAffine) {
  std::mt19937_64 rng(2);
  MlpParams p = MlpParams::zeros(MlpSpec{{3, 3, 4}});
  p.W[0].setIdentity();
  p.W[1] = test::random_matrix(4, 3, rng);
  p.b[1] = test::random_vector(4, rng);
  const Vec x = test::random_vector(3, rng).cwiseAbs();
  EXPECT_LT((mlp_forward(p, x) - (p.W[1] * x + p.b[1])).cwiseAbs().maxCoeff(), 1e-15);
  // Negative inputs are cut by the hidden ReLU.
  EXPECT_LT((mlp_forward(p, Vec(-x)) - p.b[1]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Mlp, MatchesScalarLoop) {
  std::mt19937_64 rng(4);
  MlpParams p = glorot_init(MlpSpec{{4, 12, 9, 6}}, 7);
  for (auto& b : p.b) b = test::random_vector(b.size(), rng, 0.3);
  const Mat X = test::random_matrix(4, 20, rng);
  const Mat Y = mlp_forward(p, X);
  for (Index j = 0; j < X.cols(); ++j)
    EXPECT_LT((Y.col(j) - naive_forward(p, X.col(j))).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Mlp, GlorotRangeAndDeterminism) {
  const MlpSpec spec{{5, 20, 3}};
  const MlpParams a = glorot_init(spec, 99), b = glorot_init(spec, 99), c = glorot_init(spec, 100);
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_NE(a.flatten(), c.flatten());
  const double lim0 = std::sqrt(6.0 / 25.0);
  EXPECT_LE(a.W[0].cwiseAbs().maxCoeff(), lim0);
  EXPECT_EQ(a.b[0], Vec::Zero(20));
  EXPECT_EQ(a.num_params(), 5 * 20 + 20 + 20 * 3 + 3);
}

TEST(Mlp, FlattenAssignRoundTrip) {
  const MlpParams a = glorot_init(MlpSpec{{2, 7, 3}}, 1);
  MlpParams b = MlpParams::zeros_like(a);
  b.assign(a.flatten());
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_THROW(b.assign(Vec::Zero(3)), DimensionError);
}

TEST(Mlp, InvalidSpecThrows) {
  EXPECT_THROW((MlpSpec{{3, 2}}.validate()), DimensionError);
  EXPECT_THROW(MlpSpec({{3, 0, 2}}).validate(), DimensionError);
}

TEST(Mlp, BackwardMatchesCentralDifferences) {
  std::mt19937_64 rng(8);
  MlpParams p = glorot_init(MlpSpec{{3, 10, 8, 4}}, 5);
  for (auto& b : p.b) b = test::random_vector(b.size(), rng, 0.2);
  const Mat X = test::random_matrix(3, 6, rng);
  const Mat D = test::random_matrix(4, 6, rng);
  MlpParams grad = MlpParams::zeros_like(p);
  mlp_backward(p, X, D, grad);
  const Vec g = grad.flatten();
  Vec theta = p.flatten();
  const double h = 1e-6;
  double worst = 0.0;
  for (Index i = 0; i < theta.size(); ++i) {
    const double t = theta(i);
    theta(i) = t + h;
    p.assign(theta);
    const double fp = (D.array() * mlp_forward(p, X).array()).sum();
    theta(i) = t - h;
    p.assign(theta);
    const double fm = (D.array() * mlp_forward(p, X).array()).sum();
    theta(i) = t;
    const double fd = (fp - fm) / (2 * h);
    worst = std::max(worst, std::abs(fd - g(i)) / std::max(1.0, std::abs(fd)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Mlp, BackwardAccumulates) {
  std::mt19937_64 rng(1);
  const MlpParams p = glorot_init(MlpSpec{{2, 5, 3}}, 2);
  const Mat X = test::random_matrix(2, 4, rng), D = test::random_matrix(3, 4, rng);
  MlpParams once = MlpParams::zeros_like(p), twice = MlpParams::zeros_like(p);
  mlp_backward(p, X, D, once);
  mlp_backward(p, X, D, twice);
  mlp_backward(p, X, D, twice);
  EXPECT_LT((twice.flatten() - 2.0 * once.flatten()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Optimizer, MatchesHandRecursion) {
  MlpParams p = MlpParams::zeros(MlpSpec{{1, 1, 1}});
  p.W[0](0, 0) = 0.5;
  p.b[0](0) = -0.25;
  AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.01;
  OptimizerState st = OptimizerState::for_params(p, cfg);
  const double grads[2] = {0.3, -0.7};
  double w = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    MlpParams g = MlpParams::zeros_like(p);
    g.W[0](0, 0) = grads[t - 1];
    optimizer_step(p, g, st);
    w *= 1.0 - cfg.learning_rate * cfg.weight_decay;
    m = cfg.beta1 * m + (1 - cfg.beta1) * grads[t - 1];
    v = cfg.beta2 * v + (1 - cfg.beta2) * grads[t - 1] * grads[t - 1];
    const double mh = m / (1 - std::pow(cfg.beta1, t)), vh = v / (1 - std::pow(cfg.beta2, t));
    w -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.eps);
    EXPECT_NEAR(p.W[0](0, 0), w, 1e-15);
  }
  // Zero gradient on the bias: only decay applies.
  EXPECT_NEAR(p.b[0](0), -0.25 * std::pow(1.0 - 1e-3, 2), 1e-15);
  EXPECT_EQ(st.step, 2);
}

TEST(Observable, IdentityAndConcat) {
  std::mt19937_64 rng(3);
  const Observable id = Observable::identity(3);
  const Vec x = test::random_vector(3, rng);
  EXPECT_EQ(id.lift(x), x);
  EXPECT_EQ(id.lifted_dim(), 3);

  const MlpParams net = glorot_init(MlpSpec{{3, 8, 4}}, 4);
  const Observable cat = Observable::network(net, true);
  EXPECT_EQ(cat.lifted_dim(), 7);
  EXPECT_EQ(cat.network_row_offset(), 3);
  const Vec g = cat.lift(x);
  EXPECT_EQ(g.head(3), x);
  EXPECT_LT((g.tail(4) - mlp_forward(net, x)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(cat.lift(Vec(Vec::Zero(2))), DimensionError);
}

TEST(Observable, InputNormalization) {
  std::mt19937_64 rng(6);
  const MlpParams net = glorot_init(MlpSpec{{2, 6, 3}}, 1);
  Observable g = Observable::network(net, false);
  const Vec shift = Vec::Constant(2, 1.5), scale = Vec::Constant(2, 0.5);
  g.set_input_normalization(shift, scale);
  const Vec x = test::random_vector(2, rng);
  const Vec expect = mlp_forward(net, Vec((x - shift).cwiseProduct(scale)));
  EXPECT_LT((g.lift(x) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Observable, LipschitzEstimate) {
  std::vector<Vec> s;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10; ++i) s.push_back(test::random_vector(3, rng));
  EXPECT_NEAR(lipschitz_estimate(Observable::identity(3), s), 1.0, 1e-12);
  const std::vector<Vec> same(3, Vec::Ones(3));
  EXPECT_THROW(lipschitz_estimate(Observable::identity(3), same), DimensionError);
  // The scalar map 2x has Lipschitz constant 2.
  MlpParams p = MlpParams::zeros(MlpSpec{{1, 1, 1}});
  p.W[0](0, 0) = 1.0;
  p.W[1](0, 0) = 2.0;
  std::vector<Vec> line = {Vec::Constant(1, 0.0), Vec::Constant(1, 1.0), Vec::Constant(1, 3.0)};
  EXPECT_NEAR(lipschitz_estimate(Observable::network(p, false), line), 2.0, 1e-14);
}

TEST(Observable, CheckpointRoundTripIsExact) {
  std::mt19937_64 rng(5);
  Observable g = Observable::network(glorot_init(MlpSpec{{3, 9, 5}}, 12), true);
  g.set_input_normalization(test::random_vector(3, rng), Vec::Constant(3, 1.0 / 3.0));
  const auto path = (std::filesystem::temp_directory_path() / "tvk_ckpt_roundtrip.json").string();
  save_checkpoint(path, g);
  const Observable h = load_checkpoint(path);
  EXPECT_TRUE(g == h);
  const Vec x = test::random_vector(3, rng);
  EXPECT_EQ(g.lift(x), h.lift(x));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace tvk
