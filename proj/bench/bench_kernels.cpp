// Serial reference vs OpenMP path for each parallel kernel. The second
// benchmark argument selects the path: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include "cprnn/cells.hpp"
#include "cprnn/cp.hpp"
#include "cprnn/random.hpp"
#include "cprnn/training.hpp"
#include "cprnn/witness.hpp"

namespace {

using namespace cprnn;

Exec exec_of(const benchmark::State& state) { return state.range(1) ? Exec::parallel : Exec::serial; }

TokenMatrix random_batch(Index rows, Index cols, Index vocab, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_int_distribution<Token> pick(0, static_cast<Token>(vocab - 1));
  TokenMatrix t(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) t(r, c) = pick(rng);
  return t;
}

void BM_BatchGradients(benchmark::State& state) {
  const Index n = state.range(0);
  const LmModel m = init_params(ModelKind::cprnn, n, 40, 16, Activation::tanh, 1);
  const TokenMatrix batch = random_batch(32, 51, 40, 2);
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradients(m, batch, nullptr, exec_of(state)).nll);
  state.SetItemsProcessed(state.iterations() * batch.rows() * (batch.cols() - 1));
}
BENCHMARK(BM_BatchGradients)->ArgsProduct({{32, 128}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const Index n = state.range(0);
  const LmModel m = init_params(ModelKind::cprnn, n, 40, 16, Activation::tanh, 1);
  const TokenMatrix stream = random_batch(1, 20000, 40, 3);
  const std::span<const Token> tokens(stream.data(), static_cast<std::size_t>(stream.size()));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(m, tokens, 32, exec_of(state)).nll);
  state.SetItemsProcessed(state.iterations() * stream.size());
}
BENCHMARK(BM_Evaluate)->ArgsProduct({{32, 128}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_AlsRestarts(benchmark::State& state) {
  const Index dim = state.range(0);
  auto rng = make_rng(4);
  const CpFactors f(random_uniform(dim, 4, -1.0, 1.0, rng), random_uniform(dim, 4, -1.0, 1.0, rng),
                    random_uniform(dim, 4, -1.0, 1.0, rng));
  const Tensor3 t = reconstruct(f);
  AlsConfig cfg;
  cfg.restarts = 8;
  cfg.max_iters = 200;
  cfg.tol = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(als_fit(t, 3, cfg, exec_of(state)).fit);
}
BENCHMARK(BM_AlsRestarts)->ArgsProduct({{8, 16}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_WitnessBruteforce(benchmark::State& state) {
  const Index d = state.range(0);
  const CellParams cell = random_cell(ModelKind::cpbirnn, 16, d, 8, Activation::tanh, 5);
  for (auto _ : state) benchmark::DoNotOptimize(witness_bruteforce(cell, exec_of(state)).tensor.frobenius_norm());
}
BENCHMARK(BM_WitnessBruteforce)->ArgsProduct({{32, 96}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
