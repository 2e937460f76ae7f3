// Serial reference kernels against their OpenMP counterparts, plus the
// sharded corpus profiler.
//
//   ./asgnet_bench --benchmark_filter=matmul
//   OMP_NUM_THREADS=4 ./asgnet_bench

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "asgnet/corpus.hpp"
#include "asgnet/kernels.hpp"
#include "asgnet/rng.hpp"

using namespace asgnet;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const kernels::MatDims d{n, n, n};
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(a, b, c, d);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <auto Kernel>
void bm_matmul_grad(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const kernels::MatDims d{n, n, n};
  const auto g = random_values(n * n, 3);
  const auto b = random_values(n * n, 4);
  std::vector<double> ga(n * n);
  for (auto _ : state) {
    Kernel(g, b, ga, d);
    benchmark::DoNotOptimize(ga.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <auto Kernel>
void bm_softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 64;
  const auto x = random_values(rows * cols, 5);
  std::vector<std::uint8_t> mask(cols, 1);
  for (std::size_t j = 48; j < cols; ++j) mask[j] = 0;
  std::vector<double> y(rows * cols);
  for (auto _ : state) {
    Kernel(x, mask, y, rows, cols);
    benchmark::DoNotOptimize(y.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows * cols));
}

std::vector<std::string> random_lines(std::size_t n) {
  Rng rng(6);
  std::vector<std::string> lines(n);
  for (auto& line : lines) {
    for (std::size_t k = 0; k < 10; ++k) line += "w" + std::to_string(rng.below(5000)) + "x " + std::to_string(k) + " ";
  }
  return lines;
}

void bm_profile(benchmark::State& state) {
  static const auto lines = random_lines(50000);
  ProfileOptions opts;
  opts.shards = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(profile_lines(lines, 0, opts));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * lines.size()));
}

}  // namespace

BENCHMARK(bm_matmul<kernels::serial::matmul>)->Name("matmul/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul_grad<kernels::serial::matmul_acc_a_bt>)->Name("matmul_acc_a_bt/serial")->Range(64, 256);
BENCHMARK(bm_matmul_grad<kernels::parallel::matmul_acc_a_bt>)->Name("matmul_acc_a_bt/parallel")->Range(64, 256);
BENCHMARK(bm_matmul_grad<kernels::serial::matmul_acc_at_b>)->Name("matmul_acc_at_b/serial")->Range(64, 256);
BENCHMARK(bm_matmul_grad<kernels::parallel::matmul_acc_at_b>)->Name("matmul_acc_at_b/parallel")->Range(64, 256);
BENCHMARK(bm_softmax<kernels::serial::softmax_rows>)->Name("softmax_rows/serial")->Range(64, 4096);
BENCHMARK(bm_softmax<kernels::parallel::softmax_rows>)->Name("softmax_rows/parallel")->Range(64, 4096);
BENCHMARK(bm_profile)->Name("profile_lines/shards")->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
