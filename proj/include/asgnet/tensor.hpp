#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace asgnet {

/// Every tensor is a row-major matrix; vectors are 1×n and scalars 1×1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until touched by backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  bool is_leaf() const { return inputs.empty(); }
  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Handle to a value in the compute graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  /// Gradient buffer; zeros if backward never reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  /// Detached copy holding the same values.
  Tensor detach() const;
  Tensor clone(bool requires_grad) const;

  const char* op() const { return node_->op; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse-mode sweep from a scalar root. Leaf gradients accumulate across
/// calls; interior gradients are recomputed each call.
void backward(const Tensor& loss);

// --- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Elementwise; either operand may be a 1×1 scalar that broadcasts.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log1p(const Tensor& a);
Tensor square(const Tensor& a);

/// Sum / mean of all entries, 1×1.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// a[m×n] + row[1×n] added to every row.
Tensor add_row(const Tensor& a, const Tensor& row);
/// row[1×n] repeated m times.
Tensor broadcast_rows(const Tensor& row, std::size_t m);
/// Average of rows whose mask entry is 1; 1×n. All-zero mask gives zeros.
Tensor masked_mean_rows(const Tensor& a, std::span<const std::uint8_t> row_mask);
/// Rows of `table` selected by `ids`.
Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids);
/// Stacks tensors with equal column counts.
Tensor concat_rows(const std::vector<Tensor>& parts);

/// Row-wise softmax. Columns with mask 0 are treated as -inf and get weight 0;
/// an empty mask admits every column.
Tensor softmax_rows(const Tensor& x, std::span<const std::uint8_t> col_mask = {});

/// Mean negative log-likelihood of `labels` under row-softmax of logits.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

/// Closed band [0.5 - epsilon, 0.5 + epsilon].
inline bool in_gate_band(double alpha, double epsilon) { return alpha >= 0.5 - epsilon && alpha <= 0.5 + epsilon; }

/// Confidence band filter: alpha where |alpha - 0.5| <= epsilon, else 0.
/// Band membership is a hard indicator; inside the band the gradient is 1.
Tensor gate_band(const Tensor& alpha, double epsilon);

}  // namespace asgnet
