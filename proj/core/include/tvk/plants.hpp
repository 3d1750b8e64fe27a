#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "tvk/types.hpp"

namespace tvk {

using VectorField = std::function<Vec(const Vec& x, const Vec& u, double t)>;

enum class Integrator { RK4, Discrete };

struct PlantSpec {
  std::string name;
  Index n = 0;
  Index m = 0;
  double dt = 0.1;
  Integrator integrator = Integrator::RK4;
  int substeps = 1;       // RK4 steps per sampling interval
  VectorField rhs;        // continuous field, or the discrete map x_{k+1} = rhs(x_k, u_k, t_k)
  Vec u_lo, u_hi;         // input bounds
  Vec x0;                 // nominal initial state
  Vec noise_std;          // measurement noise per state

  void validate() const;
};

// Classical RK4 step with u held constant. Throws IntegrationError on non-finite stages.
Vec rk4_step(const VectorField& f, const Vec& x, const Vec& u, double t, double dt);

// One sampling interval starting at time index k.
Vec plant_step(const PlantSpec& p, const Vec& x, const Vec& u, std::int64_t k);

struct Trajectory {
  Mat X;  // n x (N+1)
  Mat U;  // m x N
};

// Open-loop simulation from x0 with inputs U (m x N), starting at time index k0.
Trajectory simulate(const PlantSpec& p, const Vec& x0, const Mat& U, std::int64_t k0 = 0);

// Piecewise-constant inputs uniform in [u_lo, u_hi], seeded.
Mat random_inputs(const PlantSpec& p, Index steps, std::uint64_t seed);

// Adds i.i.d. N(0, sigma^2) per state component to every column.
Mat add_measurement_noise(const Mat& X, const Vec& sigma, std::uint64_t seed);
Mat add_measurement_noise(const Mat& X, double sigma, std::uint64_t seed);

PlantSpec ntvs_plant(double gamma = 6.0, double dt = 0.1, int substeps = 100);
PlantSpec duffing_plant(double alpha = 1.0, double delta = 0.2, double beta = 0.5, double gamma_f = 0.3,
                        double omega = 1.3, double dt = 0.1, int substeps = 1);

struct GrnParams {
  double K = 1.0;
  double a = 1.6;
  double gamma = 0.16;
  double beta = 0.16;
  double c = 0.06;
  double omega = 1.0;
  double dt = 1.0;
  double guard = 1e-6;
  double u_max = 5.0;
};

// Counts denominator clamps of GRN maps (shared by all copies of a spec).
struct GrnDiagnostics {
  std::atomic<long> clamps{0};
};

PlantSpec grn_plant(const GrnParams& prm = GrnParams{}, std::shared_ptr<GrnDiagnostics> diag = nullptr);

PlantSpec motivating_ltv_plant(double dt = 0.1);

// Discrete linear plant x_{k+1} = A x + B u with box |u| <= u_max.
PlantSpec linear_plant(const Mat& A, const Mat& B, const Vec& u_max);

}  // namespace tvk
