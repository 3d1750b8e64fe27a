#include <random>

#include <benchmark/benchmark.h>

#include "tvk/koopman.hpp"
#include "tvk/online.hpp"

namespace {

using namespace tvk;

struct Stream {
  Mat X, U;
};

Stream random_stream(Index r, Index m, Index N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Stream s{Mat(r, N + 1), Mat(m, N)};
  for (Index k = 0; k < N; ++k)
    for (Index i = 0; i < m; ++i) s.U(i, k) = nd(rng);
  for (Index i = 0; i < r; ++i) s.X(i, 0) = nd(rng);
  Mat A = Mat::Identity(r, r) * 0.9;
  for (Index i = 0; i + 1 < r; ++i) A(i, i + 1) = 0.05;
  for (Index k = 0; k < N; ++k) {
    s.X.col(k + 1) = A * s.X.col(k);
    s.X.block(0, k + 1, m, 1) += s.U.col(k);
    for (Index i = 0; i < r; ++i) s.X(i, k + 1) += 0.01 * nd(rng);
  }
  return s;
}

// One low-rank window update (feasibility check plus both updates) per iteration.
void BM_LowRankUpdate(benchmark::State& state) {
  const Index w = state.range(0), r = state.range(1), b = state.range(2), m = 2;
  const Stream s = random_stream(r, m, w + 64 * b + 1, 1);
  const auto obs = std::make_shared<const Observable>(Observable::identity(r));
  TrajectoryBuffer base(r, m, w, b);
  for (Index k = 0; k <= w; ++k) base.push(Snapshot{k, s.X.col(k), s.U.col(k)});
  const LiftedModel M0 = fit_model(assemble_data_matrices(base, *obs), obs, 1e-3);
  for (auto _ : state) {
    state.PauseTiming();
    TrajectoryBuffer buf = base;
    LiftedModel M = M0;
    Index next = w + 1;
    state.ResumeTiming();
    for (int u = 0; u < 64; ++u) {
      state.PauseTiming();
      for (Index j = 0; j < b; ++j, ++next) buf.push(Snapshot{next, s.X.col(next), s.U.col(next)});
      state.ResumeTiming();
      const UpdateBatch batch = form_update_batch(buf, *obs);
      if (feasibility_check(M, batch)) M = apply_update(M, batch);
      buf.advance();
    }
    benchmark::DoNotOptimize(M.A.data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}

// Full ridge refit of the advanced window per iteration.
void BM_BatchRefit(benchmark::State& state) {
  const Index w = state.range(0), r = state.range(1), m = 2;
  const Stream s = random_stream(r, m, w + 1, 2);
  const Observable g = Observable::identity(r);
  const DataMatrices D = data_from_trajectory(s.X, s.U, 0, w, g);
  for (auto _ : state) {
    auto AB = solve_batch(D, 1e-3);
    Mat C = solve_decoder(D, 1e-3);
    auto grams = init_grams(D, 1e-3);
    benchmark::DoNotOptimize(AB.first.data());
    benchmark::DoNotOptimize(C.data());
    benchmark::DoNotOptimize(grams.first.data());
  }
  state.SetItemsProcessed(state.iterations());
}

}  // namespace

BENCHMARK(BM_LowRankUpdate)->Args({200, 32, 10})->Args({400, 32, 10})->Args({800, 32, 10})->Args({400, 64, 1});
BENCHMARK(BM_BatchRefit)->Args({200, 32})->Args({400, 32})->Args({800, 32})->Args({400, 64});
BENCHMARK_MAIN();
