#include <algorithm>
#include <cmath>
#include <limits>

#include "asgnet/kernels.hpp"

namespace asgnet::kernels::serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, MatDims d) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < d.p; ++i) {
    double* crow = c.data() + i * d.r;
    for (std::size_t k = 0; k < d.q; ++k) {
      const double aik = a[i * d.q + k];
      const double* brow = b.data() + k * d.r;
      for (std::size_t j = 0; j < d.r; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_acc_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> ga, MatDims d) {
  for (std::size_t i = 0; i < d.p; ++i) {
    const double* grow = g.data() + i * d.r;
    for (std::size_t k = 0; k < d.q; ++k) {
      const double* brow = b.data() + k * d.r;
      double s = 0.0;
      for (std::size_t j = 0; j < d.r; ++j) s += grow[j] * brow[j];
      ga[i * d.q + k] += s;
    }
  }
}

void matmul_acc_at_b(std::span<const double> a, std::span<const double> g, std::span<double> gb, MatDims d) {
  for (std::size_t i = 0; i < d.p; ++i) {
    const double* grow = g.data() + i * d.r;
    for (std::size_t k = 0; k < d.q; ++k) {
      const double aik = a[i * d.q + k];
      double* out = gb.data() + k * d.r;
      for (std::size_t j = 0; j < d.r; ++j) out[j] += aik * grow[j];
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<const std::uint8_t> col_mask, std::span<double> y,
                  std::size_t rows, std::size_t cols) {
  const bool masked = !col_mask.empty();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xr = x.data() + i * cols;
    double* yr = y.data() + i * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      if (!masked || col_mask[j]) mx = std::max(mx, xr[j]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      std::fill(yr, yr + cols, 0.0);
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = (!masked || col_mask[j]) ? std::exp(xr[j] - mx) : 0.0;
      sum += yr[j];
    }
    for (std::size_t j = 0; j < cols; ++j) yr[j] /= sum;
  }
}

}  // namespace asgnet::kernels::serial
