#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "tvk/errors.hpp"
#include "tvk/plants.hpp"

namespace tvk {
namespace {

TEST(Rk4, TaylorMultiplierOnLinearField) {
  const VectorField f = [](const Vec& x, const Vec&, double) { return Vec(x); };
  const double h = 0.3;
  const Vec x = rk4_step(f, Vec::Ones(1), Vec(0), 0.0, h);
  EXPECT_NEAR(x(0), 1 + h + h * h / 2 + h * h * h / 6 + h * h * h * h / 24, 1e-15);
}

TEST(Rk4, FourthOrderConvergence) {
  // x' = -x + sin(t), x(0) = 1 has x(t) = 1.5 e^{-t} + (sin t - cos t) / 2.
  const VectorField f = [](const Vec& x, const Vec&, double t) { return Vec(-x.array() + std::sin(t)); };
  auto err = [&](int steps) {
    const double T = 1.0, h = T / steps;
    Vec x = Vec::Ones(1);
    for (int i = 0; i < steps; ++i) x = rk4_step(f, x, Vec(0), i * h, h);
    return std::abs(x(0) - (1.5 * std::exp(-T) + 0.5 * (std::sin(T) - std::cos(T))));
  };
  const double order = std::log2(err(20) / err(40));
  EXPECT_GT(order, 3.7);
  EXPECT_LT(order, 4.3);
}

TEST(Rk4, NonFiniteStageThrows) {
  const VectorField f = [](const Vec& x, const Vec&, double) { return Vec(x.array().square() * 1e300); };
  EXPECT_THROW(rk4_step(f, Vec::Constant(1, 1e10), Vec(0), 0.0, 1.0), IntegrationError);
}

TEST(Plants, LinearPlantIsExactMap) {
  Mat A(2, 2), B(2, 1);
  A << 0.9, 0.1, 0.0, 0.8;
  B << 0.0, 1.0;
  const PlantSpec p = linear_plant(A, B, Vec::Ones(1));
  const Vec x = (Vec(2) << 1.0, 2.0).finished();
  const Vec u = Vec::Constant(1, 0.5);
  EXPECT_LT((plant_step(p, x, u, 0) - (A * x + B * u)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(linear_plant(A, Mat::Ones(3, 1), Vec::Ones(1)), DimensionError);
}

TEST(Plants, SimulationIsDeterministic) {
  Mat A(2, 2), B(2, 1);
  A << 0.9, 0.2, -0.2, 0.9;
  B << 0.0, 1.0;
  const PlantSpec p = linear_plant(A, B, Vec::Ones(1));
  const Mat U1 = random_inputs(p, 80, 5), U2 = random_inputs(p, 80, 5);
  EXPECT_EQ(U1, U2);
  EXPECT_NE(U1, random_inputs(p, 80, 6));
  EXPECT_GE(U1.minCoeff(), p.u_lo.minCoeff());
  EXPECT_LE(U1.maxCoeff(), p.u_hi.maxCoeff());
  const Trajectory a = simulate(p, p.x0, U1), b = simulate(p, p.x0, U2);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.X.cols(), 81);
  EXPECT_EQ(a.X.col(0), p.x0);
}

TEST(Plants, MotivatingSystemHasNoInput) {
  const PlantSpec p = motivating_ltv_plant();
  EXPECT_EQ(p.m, 0);
  EXPECT_EQ(p.x0, Vec::Ones(2));
  const Trajectory t = simulate(p, p.x0, Mat(0, 50));
  EXPECT_TRUE(t.X.allFinite());
  // Energy-like quantity stays bounded over the run.
  EXPECT_LT(t.X.cwiseAbs().maxCoeff(), 10.0);
}

TEST(Plants, NtvsMatchesFinerIntegration) {
  const PlantSpec coarse = ntvs_plant(6.0, 0.1, 50), fine = ntvs_plant(6.0, 0.1, 100);
  const Mat U(0, 30);
  const Trajectory a = simulate(coarse, fine.x0, U), b = simulate(fine, fine.x0, U);
  EXPECT_LT((a.X - b.X).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Plants, GrnStaysPositiveUnderAdmissibleInputs) {
  auto diag = std::make_shared<GrnDiagnostics>();
  const PlantSpec p = grn_plant(GrnParams{}, diag);
  EXPECT_EQ(p.n, 6);
  EXPECT_EQ(p.m, 3);
  Mat U = random_inputs(p, 200, 3);
  const Trajectory t = simulate(p, p.x0, U);
  EXPECT_TRUE(t.X.allFinite());
  EXPECT_GT(t.X.minCoeff(), 0.0);
}

TEST(Noise, EmpiricalStdWithinTwoPercent) {
  const Mat X = Mat::Zero(2, 100000);
  const Vec sigma = (Vec(2) << 0.1, 2.0).finished();
  const Mat N = add_measurement_noise(X, sigma, 11);
  for (Index i = 0; i < 2; ++i) {
    const double mean = N.row(i).mean();
    const double sd = std::sqrt((N.row(i).array() - mean).square().sum() / (N.cols() - 1));
    EXPECT_NEAR(sd / sigma(i), 1.0, 0.02);
    EXPECT_NEAR(mean, 0.0, 5.0 * sigma(i) / std::sqrt(1e5));
  }
  EXPECT_EQ(add_measurement_noise(X, 0.0, 1), X);
  EXPECT_EQ(add_measurement_noise(X, sigma, 11), N);
}

}  // namespace
}  // namespace tvk
