#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Dense row-major kernels used by the tensor ops. Every kernel exists twice:
// a serial reference and an OpenMP version that splits output rows across
// threads. Both accumulate each output element in the same order, so their
// results are bit-identical; tests rely on that.
namespace asgnet::kernels {

enum class Backend { kAuto, kSerial, kParallel };

/// Process-wide choice used by the dispatching entry points below.
void set_backend(Backend b);
Backend backend();

/// Whether the OpenMP variants were compiled in.
bool parallel_available();

struct MatDims {
  std::size_t p, q, r;
};

namespace serial {
/// c[p×r] = a[p×q] · b[q×r]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
/// ga[p×q] += g[p×r] · b[q×r]ᵀ
void matmul_acc_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d);
/// gb[q×r] += a[p×q]ᵀ · g[p×r]
void matmul_acc_at_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d);
/// Row softmax with optional column mask (0 = excluded, gets weight 0). Rows
/// with no admitted column become all zeros.
void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> col_mask, std::span<double> y,
                  std::size_t rows, std::size_t cols);
}  // namespace serial

namespace parallel {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_acc_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d);
void matmul_acc_at_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d);
void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> col_mask, std::span<double> y,
                  std::size_t rows, std::size_t cols);
}  // namespace parallel

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d);
void matmul_acc_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d);
void matmul_acc_at_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d);
void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> col_mask, std::span<double> y,
                  std::size_t rows, std::size_t cols);

}  // namespace asgnet::kernels
