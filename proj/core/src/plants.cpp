#include "tvk/plants.hpp"

#include <cmath>
#include <iostream>
#include <random>

#include "tvk/errors.hpp"

namespace tvk {

void PlantSpec::validate() const {
  if (n < 1 || m < 0) throw DimensionError("plant dimensions invalid");
  if (!(dt > 0.0)) throw DimensionError("sampling interval must be positive");
  if (substeps < 1) throw DimensionError("substeps must be >= 1");
  if (!rhs) throw DimensionError("plant has no dynamics");
  if (u_lo.size() != m || u_hi.size() != m) throw DimensionError("input bounds length mismatch");
  if (x0.size() != n) throw DimensionError("initial state length mismatch");
}

Vec rk4_step(const VectorField& f, const Vec& x, const Vec& u, double t, double dt) {
  const Vec k1 = f(x, u, t);
  const Vec k2 = f(x + 0.5 * dt * k1, u, t + 0.5 * dt);
  const Vec k3 = f(x + 0.5 * dt * k2, u, t + 0.5 * dt);
  const Vec k4 = f(x + dt * k3, u, t + dt);
  Vec out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!k1.allFinite() || !k2.allFinite() || !k3.allFinite() || !k4.allFinite() || !out.allFinite())
    throw IntegrationError("non-finite value during RK4 step at t=" + std::to_string(t));
  return out;
}

Vec plant_step(const PlantSpec& p, const Vec& x, const Vec& u, std::int64_t k) {
  if (x.size() != p.n || u.size() != p.m) throw DimensionError("plant step dimension mismatch");
  const double t0 = static_cast<double>(k) * p.dt;
  if (p.integrator == Integrator::Discrete) {
    Vec out = p.rhs(x, u, t0);
    if (!out.allFinite()) throw IntegrationError("non-finite state from discrete map");
    return out;
  }
  const double h = p.dt / p.substeps;
  Vec s = x;
  for (int i = 0; i < p.substeps; ++i) s = rk4_step(p.rhs, s, u, t0 + i * h, h);
  return s;
}

Trajectory simulate(const PlantSpec& p, const Vec& x0, const Mat& U, std::int64_t k0) {
  if (U.rows() != p.m) throw DimensionError("input rows mismatch");
  Trajectory tr;
  tr.U = U;
  tr.X.resize(p.n, U.cols() + 1);
  tr.X.col(0) = x0;
  for (Index k = 0; k < U.cols(); ++k) tr.X.col(k + 1) = plant_step(p, tr.X.col(k), U.col(k), k0 + k);
  return tr;
}

Mat random_inputs(const PlantSpec& p, Index steps, std::uint64_t seed) {
  Mat U(p.m, steps);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index k = 0; k < steps; ++k)
    for (Index i = 0; i < p.m; ++i) U(i, k) = p.u_lo(i) + (p.u_hi(i) - p.u_lo(i)) * unit(rng);
  return U;
}

Mat add_measurement_noise(const Mat& X, const Vec& sigma, std::uint64_t seed) {
  if (sigma.size() != X.rows()) throw DimensionError("noise vector length mismatch");
  if ((sigma.array() < 0.0).any()) throw DimensionError("noise std must be nonnegative");
  Mat out = X;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Index k = 0; k < X.cols(); ++k)
    for (Index i = 0; i < X.rows(); ++i) {
      const double z = nd(rng);
      if (sigma(i) > 0.0) out(i, k) += sigma(i) * z;
    }
  return out;
}

Mat add_measurement_noise(const Mat& X, double sigma, std::uint64_t seed) {
  return add_measurement_noise(X, Vec::Constant(X.rows(), sigma), seed);
}

PlantSpec ntvs_plant(double gamma, double dt, int substeps) {
  PlantSpec p;
  p.name = "ntvs";
  p.n = 2;
  p.m = 0;
  p.dt = dt;
  p.substeps = substeps;
  p.rhs = [gamma](const Vec& x, const Vec&, double t) {
    const double a = 1.0 + gamma * t;
    Vec d(2);
    d << a * std::cos(x(1)), -a * std::cos(x(0));
    return d;
  };
  p.u_lo = p.u_hi = Vec(0);
  p.x0 = Vec(2);
  p.x0 << 1.0, 0.0;
  p.noise_std = Vec::Zero(2);
  return p;
}

PlantSpec duffing_plant(double alpha, double delta, double beta, double gamma_f, double omega, double dt,
                        int substeps) {
  PlantSpec p;
  p.name = "duffing";
  p.n = 2;
  p.m = 0;
  p.dt = dt;
  p.substeps = substeps;
  p.rhs = [=](const Vec& x, const Vec&, double t) {
    Vec d(2);
    d << x(1), -alpha * x(0) - delta * x(1) - beta * x(0) * x(0) * x(0) + gamma_f * std::sin(omega * t);
    return d;
  };
  p.u_lo = p.u_hi = Vec(0);
  p.x0 = Vec(2);
  p.x0 << 1.0, 0.0;
  p.noise_std = Vec::Zero(2);
  return p;
}

PlantSpec grn_plant(const GrnParams& q, std::shared_ptr<GrnDiagnostics> diag) {
  PlantSpec p;
  p.name = "grn";
  p.n = 6;
  p.m = 3;
  p.dt = q.dt;
  p.integrator = Integrator::Discrete;
  if (!diag) diag = std::make_shared<GrnDiagnostics>();
  p.rhs = [q, diag](const Vec& x, const Vec& u, double t) {
    const double s = q.K * std::sin(q.omega * t);
    auto hill = [&](double xr) {
      double den = s + xr * xr;
      if (den < q.guard) {
        if (diag->clamps.fetch_add(1) == 0)
          std::clog << "warning: GRN denominator " << den << " clamped to " << q.guard << " at t=" << t << '\n';
        den = q.guard;
      }
      return q.a / den;
    };
    // mRNA i is repressed by protein 6, 4, 5 respectively; protein i+3 is translated from mRNA i.
    Vec y(6);
    y(0) = x(0) + q.dt * (-q.gamma * x(0) + hill(x(5)) + u(0));
    y(1) = x(1) + q.dt * (-q.gamma * x(1) + hill(x(3)) + u(1));
    y(2) = x(2) + q.dt * (-q.gamma * x(2) + hill(x(4)) + u(2));
    y(3) = x(3) + q.dt * (q.beta * x(0) - q.c * x(3));
    y(4) = x(4) + q.dt * (q.beta * x(1) - q.c * x(4));
    y(5) = x(5) + q.dt * (q.beta * x(2) - q.c * x(5));
    return y;
  };
  p.u_lo = Vec::Zero(3);
  p.u_hi = Vec::Constant(3, q.u_max);
  p.x0 = Vec::Constant(6, 2.5);
  p.noise_std = Vec::Zero(6);
  return p;
}

PlantSpec motivating_ltv_plant(double dt) {
  PlantSpec p;
  p.name = "ltv";
  p.n = 2;
  p.m = 0;
  p.dt = dt;
  p.rhs = [](const Vec& x, const Vec&, double t) {
    Vec d(2);
    d << x(1), -x(0) + (-0.2 + 0.5 * std::sin(t)) * x(1);
    return d;
  };
  p.u_lo = p.u_hi = Vec(0);
  p.x0 = Vec::Ones(2);
  p.noise_std = Vec::Zero(2);
  return p;
}

PlantSpec linear_plant(const Mat& A, const Mat& B, const Vec& u_max) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || u_max.size() != B.cols())
    throw DimensionError("linear plant shapes inconsistent");
  PlantSpec p;
  p.name = "linear";
  p.n = A.rows();
  p.m = B.cols();
  p.dt = 1.0;
  p.integrator = Integrator::Discrete;
  p.rhs = [A, B](const Vec& x, const Vec& u, double) { return Vec(A * x + B * u); };
  p.u_lo = -u_max;
  p.u_hi = u_max;
  p.x0 = Vec::Ones(p.n);
  p.noise_std = Vec::Zero(p.n);
  return p;
}

}  // namespace tvk
