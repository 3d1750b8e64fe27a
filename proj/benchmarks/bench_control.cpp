#include <random>

#include <benchmark/benchmark.h>

#include "tvk/controller.hpp"

namespace {

using namespace tvk;

struct Instance {
  Mat A, B;
  MpcConfig cfg;
  Vec g;
};

Instance make_instance(Index r, Index m, Index H) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Instance in;
  in.A = Mat::Identity(r, r) * 0.9;
  for (Index i = 0; i + 1 < r; ++i) in.A(i, i + 1) = 0.1;
  in.B = Mat::Zero(r, m);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < m; ++j) in.B(i, j) = 0.1 * nd(rng);
  in.cfg.H = H;
  in.cfg.Q = Mat::Identity(r, r);
  in.cfg.R = Mat::Identity(m, m) * 0.1;
  in.cfg.u_max = Vec::Ones(m);
  in.g = Vec::Constant(r, 0.05);
  return in;
}

void BM_TerminalSdp(benchmark::State& state) {
  const Instance in = make_instance(state.range(0), 2, 10);
  const Vec ub = in.cfg.symmetric_bound();
  for (auto _ : state) {
    const SdpResult res = solve_sdp(build_sdp(in.A, in.B, in.cfg, in.g, ub));
    benchmark::DoNotOptimize(res.cert.gamma);
  }
}

void BM_MpcSolve(benchmark::State& state) {
  const Instance in = make_instance(state.range(0), 2, state.range(1));
  const SdpResult res = solve_sdp(build_sdp(in.A, in.B, in.cfg, in.g, in.cfg.symmetric_bound()));
  if (!res.ok()) {
    state.SkipWithError("terminal certificate not found");
    return;
  }
  const Vec g = Vec::Constant(in.A.rows(), 2.0);
  for (auto _ : state) {
    const MpcSolution sol = solve_mpc(in.A, in.B, g, res.cert, in.cfg);
    benchmark::DoNotOptimize(sol.u0.data());
  }
}

}  // namespace

BENCHMARK(BM_TerminalSdp)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MpcSolve)->Args({8, 10})->Args({16, 16})->Args({16, 32})->Unit(benchmark::kMicrosecond);
