#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "asgnet/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace asgnet::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::kAuto};

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = std::size_t{1} << 16;

bool use_parallel(std::size_t work) {
  switch (g_backend.load(std::memory_order_relaxed)) {
    case Backend::kSerial: return false;
    case Backend::kParallel: return true;
    case Backend::kAuto: break;
  }
#ifdef _OPENMP
  return work >= kParallelWork && omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}
}  // namespace

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() { return g_backend.load(std::memory_order_relaxed); }

bool parallel_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  const auto p = static_cast<std::ptrdiff_t>(d.p);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < p; ++i) {
    double* crow = c.data() + static_cast<std::size_t>(i) * d.r;
    std::fill(crow, crow + d.r, 0.0);
    for (std::size_t k = 0; k < d.q; ++k) {
      const double aik = a[static_cast<std::size_t>(i) * d.q + k];
      const double* brow = b.data() + k * d.r;
      for (std::size_t j = 0; j < d.r; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_acc_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d) {
  const auto p = static_cast<std::ptrdiff_t>(d.p);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < p; ++i) {
    const double* grow = g.data() + static_cast<std::size_t>(i) * d.r;
    for (std::size_t k = 0; k < d.q; ++k) {
      const double* brow = b.data() + k * d.r;
      double s = 0.0;
      for (std::size_t j = 0; j < d.r; ++j) s += grow[j] * brow[j];
      ga[static_cast<std::size_t>(i) * d.q + k] += s;
    }
  }
}

void matmul_acc_at_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d) {
  // Rows of gb are independent; within a row the i order matches the serial
  // kernel.
  const auto q = static_cast<std::ptrdiff_t>(d.q);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < q; ++k) {
    double* out = gb.data() + static_cast<std::size_t>(k) * d.r;
    for (std::size_t i = 0; i < d.p; ++i) {
      const double aik = a[i * d.q + static_cast<std::size_t>(k)];
      const double* grow = g.data() + i * d.r;
      for (std::size_t j = 0; j < d.r; ++j) out[j] += aik * grow[j];
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> col_mask, std::span<double> y,
                  std::size_t rows, std::size_t cols) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i);
    serial::softmax_rows(x.subspan(row * cols, cols), col_mask, y.subspan(row * cols, cols), 1, cols);
  }
}

}  // namespace parallel

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  if (use_parallel(d.p * d.q * d.r)) parallel::matmul(a, b, c, d);
  else serial::matmul(a, b, c, d);
}

void matmul_acc_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d) {
  if (use_parallel(d.p * d.q * d.r)) parallel::matmul_acc_a_bt(g, b, ga, d);
  else serial::matmul_acc_a_bt(g, b, ga, d);
}

void matmul_acc_at_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d) {
  if (use_parallel(d.p * d.q * d.r)) parallel::matmul_acc_at_b(a, g, gb, d);
  else serial::matmul_acc_at_b(a, g, gb, d);
}

void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> col_mask, std::span<double> y,
                  std::size_t rows, std::size_t cols) {
  if (use_parallel(rows * cols * 8)) parallel::softmax_rows(x, col_mask, y, rows, cols);
  else serial::softmax_rows(x, col_mask, y, rows, cols);
}

}  // namespace asgnet::kernels
