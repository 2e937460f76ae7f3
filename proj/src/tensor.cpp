#include "asgnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "asgnet/common.hpp"
#include "asgnet/kernels.hpp"

namespace asgnet {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::string Shape::str() const { return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")"; }

namespace {

thread_local bool t_grad_enabled = true;

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw ShapeError("tensor of shape " + shape.str() + " given " + std::to_string(values.size()) + " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

// Result node. The backward rule is kept only if recording is on and some
// input needs a gradient.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<NodePtr> inputs, const char* op,
                   std::function<void(Node&)> backward_rule) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(values);
  n->op = op;
  bool needs = false;
  if (t_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in->requires_grad;
  }
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward_rule);
  }
  return Tensor(std::move(n));
}

// Accumulate into an input gradient only when that input is tracked.
template <typename F>
void with_grad(const NodePtr& in, F&& f) {
  if (in->requires_grad) f(in->ensure_grad());
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  const auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {a.node()}, name, [deriv](Node& self) {
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      const auto& x = self.inputs[0]->value;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(x[i], self.value[i]);
    });
  });
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.shape().is_scalar()) return Broadcast::kLeftScalar;
  if (b.shape().is_scalar()) return Broadcast::kRightScalar;
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

}  // namespace

// --- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(shape.size(), 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(shape.size(), v), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1, 1}, {v}, requires_grad); }

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const Shape s{1, values.size()};
  return from(s, std::move(values), requires_grad);
}

double Tensor::item() const {
  if (!shape().is_scalar()) throw ShapeError("item() on non-scalar tensor " + shape().str());
  return node_->value[0];
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(make_leaf(shape(), node_->value, false)); }

Tensor Tensor::clone(bool requires_grad) const { return Tensor(make_leaf(shape(), node_->value, requires_grad)); }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

// --- backward ----------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || !loss.shape().is_scalar()) {
    throw ShapeError("backward needs a scalar root, got " + (loss.defined() ? loss.shape().str() : "undefined"));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order; each node once.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

// --- ops ---------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape().str() + " · " + b.shape().str());
  }
  const kernels::MatDims d{a.rows(), a.cols(), b.cols()};
  std::vector<double> out(d.p * d.r);
  kernels::matmul(a.values(), b.values(), out, d);
  return make_result({d.p, d.r}, std::move(out), {a.node(), b.node()}, "matmul", [d](Node& self) {
    const auto& A = self.inputs[0];
    const auto& B = self.inputs[1];
    with_grad(A, [&](std::vector<double>& g) { kernels::matmul_acc_a_bt(self.grad, B->value, g, d); });
    with_grad(B, [&](std::vector<double>& g) { kernels::matmul_acc_at_b(A->value, self.grad, g, d); });
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<double> out(m * n);
  const auto in = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  }
  return make_result({n, m}, std::move(out), {a.node()}, "transpose", [m, n](Node& self) {
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
      }
    });
  });
}

namespace {

// Shared body of add/sub: out = a + sign*b.
Tensor add_signed(const Tensor& a, const Tensor& b, double sign, const char* name) {
  const Broadcast kind = broadcast_kind(a, b, name);
  const Shape shape = kind == Broadcast::kLeftScalar ? b.shape() : a.shape();
  std::vector<double> out(shape.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = kind == Broadcast::kLeftScalar ? av[0] : av[i];
    const double y = kind == Broadcast::kRightScalar ? bv[0] : bv[i];
    out[i] = x + sign * y;
  }
  return make_result(shape, std::move(out), {a.node(), b.node()}, name, [kind, sign](Node& self) {
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      if (kind == Broadcast::kLeftScalar) {
        double s = 0.0;
        for (double v : self.grad) s += v;
        g[0] += s;
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    });
    with_grad(self.inputs[1], [&](std::vector<double>& g) {
      if (kind == Broadcast::kRightScalar) {
        double s = 0.0;
        for (double v : self.grad) s += v;
        g[0] += sign * s;
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
      }
    });
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_signed(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_signed(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a, b, "mul");
  const Shape shape = kind == Broadcast::kLeftScalar ? b.shape() : a.shape();
  std::vector<double> out(shape.size());
  const auto av = a.values();
  const auto bv = b.values();
  const auto ai = [kind](std::size_t i) { return kind == Broadcast::kLeftScalar ? 0 : i; };
  const auto bi = [kind](std::size_t i) { return kind == Broadcast::kRightScalar ? 0 : i; };
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[ai(i)] * bv[bi(i)];
  return make_result(shape, std::move(out), {a.node(), b.node()}, "mul", [ai, bi](Node& self) {
    const auto& A = self.inputs[0]->value;
    const auto& B = self.inputs[1]->value;
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[ai(i)] += self.grad[i] * B[bi(i)];
    });
    with_grad(self.inputs[1], [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bi(i)] += self.grad[i] * A[ai(i)];
    });
  });
}

Tensor scale(const Tensor& a, double k) {
  return unary(a, "scale", [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Tensor add_scalar(const Tensor& a, double k) {
  return unary(a, "add_scalar", [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        // Split by sign so exp never overflows.
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log1p(const Tensor& a) {
  return unary(a, "log1p", [](double x) { return std::log1p(x); }, [](double x, double) { return 1.0 / (1.0 + x); });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({1, 1}, {s}, {a.node()}, "sum", [](Node& self) {
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      for (double& v : g) v += self.grad[0];
    });
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({1, 1}, {s / n}, {a.node()}, "mean", [n](Node& self) {
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      for (double& v : g) v += self.grad[0] / n;
    });
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: cannot add " + row.shape().str() + " to rows of " + a.shape().str());
  }
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto r = row.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += r[j];
  }
  return make_result(a.shape(), std::move(out), {a.node(), row.node()}, "add_row", [m, n](Node& self) {
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    with_grad(self.inputs[1], [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      }
    });
  });
}

Tensor broadcast_rows(const Tensor& row, std::size_t m) {
  if (row.rows() != 1) throw ShapeError("broadcast_rows: expected a row vector, got " + row.shape().str());
  const std::size_t n = row.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) std::copy(row.values().begin(), row.values().end(), out.begin() + i * n);
  return make_result({m, n}, std::move(out), {row.node()}, "broadcast_rows", [m, n](Node& self) {
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      }
    });
  });
}

Tensor masked_mean_rows(const Tensor& a, std::span<const std::uint8_t> row_mask) {
  if (row_mask.size() != a.rows()) {
    throw ShapeError("masked_mean_rows: mask has " + std::to_string(row_mask.size()) + " entries for " +
                     a.shape().str());
  }
  const std::size_t n = a.cols();
  std::vector<std::uint8_t> mask(row_mask.begin(), row_mask.end());
  std::size_t count = 0;
  for (auto v : mask) count += v ? 1 : 0;
  std::vector<double> out(n, 0.0);
  const auto in = a.values();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += in[i * n + j];
  }
  const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
  for (double& v : out) v *= inv;
  return make_result({1, n}, std::move(out), {a.node()}, "masked_mean_rows",
                     [mask = std::move(mask), n, inv](Node& self) {
                       with_grad(self.inputs[0], [&](std::vector<double>& g) {
                         for (std::size_t i = 0; i < mask.size(); ++i) {
                           if (!mask[i]) continue;
                           for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j] * inv;
                         }
                       });
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids) {
  const std::size_t n = table.cols();
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * n);
  const auto tv = table.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(idx[i]) + " outside table " + table.shape().str());
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(idx[i]) * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  const Shape shape{idx.size(), n};
  return make_result(shape, std::move(out), {table.node()}, "gather_rows",
                     [idx = std::move(idx), n](Node& self) {
                       with_grad(self.inputs[0], [&](std::vector<double>& g) {
                         for (std::size_t i = 0; i < idx.size(); ++i) {
                           const std::size_t base = static_cast<std::size_t>(idx[i]) * n;
                           for (std::size_t j = 0; j < n; ++j) g[base + j] += self.grad[i * n + j];
                         }
                       });
                     });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ShapeError("concat_rows: column mismatch " + parts[0].shape().str() + " vs " + p.shape().str());
    m += p.rows();
    inputs.push_back(p.node());
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result({m, n}, std::move(out), std::move(inputs), "concat_rows", [](Node& self) {
    std::size_t offset = 0;
    for (const auto& in : self.inputs) {
      const std::size_t len = in->value.size();
      with_grad(in, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
      });
      offset += len;
    }
  });
}

Tensor softmax_rows(const Tensor& x, std::span<const std::uint8_t> col_mask) {
  if (!col_mask.empty() && col_mask.size() != x.cols()) {
    throw ShapeError("softmax_rows: mask has " + std::to_string(col_mask.size()) + " entries for " + x.shape().str());
  }
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  std::vector<double> out(x.size());
  kernels::softmax_rows(x.values(), col_mask, out, m, n);
  return make_result(x.shape(), std::move(out), {x.node()}, "softmax_rows", [m, n](Node& self) {
    with_grad(self.inputs[0], [&](std::vector<double>& g) {
      // dx = y ⊙ (dy - <dy, y>) per row; masked entries have y = 0.
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = self.value.data() + i * n;
        const double* dy = self.grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - dot);
      }
    });
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  const std::size_t b = logits.rows();
  const std::size_t k = logits.cols();
  if (labels.size() != b) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " + logits.shape().str());
  }
  for (std::size_t l : labels) {
    if (l >= k) throw ShapeError("cross_entropy: label " + std::to_string(l) + " out of range for " + std::to_string(k) + " classes");
  }
  std::vector<double> probs(logits.size());
  kernels::softmax_rows(logits.values(), {}, probs, b, k);
  const auto lv = logits.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    // log-sum-exp form keeps the loss finite for extreme margins.
    double mx = lv[i * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, lv[i * k + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(lv[i * k + j] - mx);
    loss += (mx + std::log(s)) - lv[i * k + labels[i]];
  }
  loss /= static_cast<double>(b);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return make_result({1, 1}, {loss}, {logits.node()}, "cross_entropy",
                     [probs = std::move(probs), lab = std::move(lab), b, k](Node& self) {
                       with_grad(self.inputs[0], [&](std::vector<double>& g) {
                         const double scale_by = self.grad[0] / static_cast<double>(b);
                         for (std::size_t i = 0; i < b; ++i) {
                           for (std::size_t j = 0; j < k; ++j) {
                             const double onehot = j == lab[i] ? 1.0 : 0.0;
                             g[i * k + j] += scale_by * (probs[i * k + j] - onehot);
                           }
                         }
                       });
                     });
}

Tensor gate_band(const Tensor& alpha, double epsilon) {
  return unary(
      alpha, "gate_band", [epsilon](double a) { return in_gate_band(a, epsilon) ? a : 0.0; },
      [epsilon](double a, double) { return in_gate_band(a, epsilon) ? 1.0 : 0.0; });
}

}  // namespace asgnet
