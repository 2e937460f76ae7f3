#pragma once

// Plain scalar loops for the fusion and global attention path. Written
// without the tensor library so it can serve as an oracle for it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace asgnet::testing {

using Matrix = std::vector<std::vector<double>>;

struct ReferenceOutput {
  Matrix h_c, confidence, h_o, attention, attended;
};

inline ReferenceOutput reference_fusion(const Matrix& c, const Matrix& w, const std::vector<double>& b,
                                        const std::vector<double>& h_e, const std::vector<std::uint8_t>& mask,
                                        double epsilon) {
  const std::size_t m = c.size();
  const std::size_t d = w.size();
  ReferenceOutput r;
  r.h_c.assign(m, std::vector<double>(d, 0.0));
  r.confidence = r.h_c;
  r.h_o = r.h_c;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < d; ++k) s += c[i][k] * w[k][j];
      r.h_c[i][j] = s;
      const double conf = 1.0 / (1.0 + std::exp(-s));
      r.confidence[i][j] = conf;
      const double gate = (conf >= 0.5 - epsilon && conf <= 0.5 + epsilon) ? conf : 0.0;
      r.h_o[i][j] = std::max(0.0, s) + gate * h_e[j];
    }
  }
  r.attention.assign(m, std::vector<double>(m, 0.0));
  r.attended.assign(m, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> score(m, -std::numeric_limits<double>::infinity());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (!mask[j]) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += r.h_o[i][k] * c[j][k];
      score[j] = s;
      top = std::max(top, s);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask[j]) z += std::exp(score[j] - top);
    }
    for (std::size_t j = 0; j < m; ++j) {
      r.attention[i][j] = (mask[j] && z > 0.0) ? std::exp(score[j] - top) / z : 0.0;
    }
    for (std::size_t k = 0; k < d; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += r.attention[i][j] * c[j][k];
      r.attended[i][k] = s;
    }
  }
  return r;
}

/// h_e = e_s W + b.
inline std::vector<double> reference_stat_projection(const std::vector<double>& e_s, const Matrix& w,
                                                     const std::vector<double>& b) {
  std::vector<double> out(b);
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t k = 0; k < e_s.size(); ++k) out[j] += e_s[k] * w[k][j];
  }
  return out;
}

/// Plain unscaled self-attention softmax(C Cᵀ) C over unmasked keys.
inline Matrix reference_self_attention(const Matrix& c, const std::vector<std::uint8_t>& mask) {
  const std::size_t m = c.size();
  const std::size_t d = m == 0 ? 0 : c[0].size();
  Matrix out(m, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> score(m, 0.0);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (!mask[j]) continue;
      for (std::size_t k = 0; k < d; ++k) score[j] += c[i][k] * c[j][k];
      top = std::max(top, score[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask[j]) z += std::exp(score[j] - top);
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (!mask[j]) continue;
      const double a = std::exp(score[j] - top) / z;
      for (std::size_t k = 0; k < d; ++k) out[i][k] += a * c[j][k];
    }
  }
  return out;
}

}  // namespace asgnet::testing
