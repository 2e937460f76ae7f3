#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asgnet/rng.hpp"
#include "asgnet/tensor.hpp"

namespace asgnet {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Ordered collection of trainable tensors. Order defines checkpoint layout.
class ParamSet {
 public:
  Tensor& add(std::string name, Tensor t);
  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<NamedParam>& params() { return params_; }
  const Tensor& get(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  void zero_grad();

  /// Deep copy of all values, for best-epoch snapshots.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<NamedParam> params_;
};

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(Shape shape, Rng& rng, double gain = 1.0);
Tensor normal_init(Shape shape, double stddev, Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam over a ParamSet.
class Adam {
 public:
  Adam(ParamSet& params, AdamConfig config);

  void step();
  void zero_grad() { params_->zero_grad(); }

  const AdamState& state() const { return state_; }
  void set_state(AdamState s);

 private:
  ParamSet* params_;
  AdamState state_;
};

/// Named parameter table plus optional optimizer state and string metadata.
///
/// Binary layout, little-endian:
///   "ASGCKPT1"
///   u32 meta_count, then (u32 len, bytes key, u32 len, bytes value)*
///   u32 param_count, then (u32 len, bytes name, u32 rank=2, u64 rows,
///                          u64 cols, f64 values[rows*cols])*
///   u8 has_adam; if 1: u64 step, f64 lr, beta1, beta2, epsilon, then per
///                       parameter f64 m[size], f64 v[size]
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<double>> values;
  std::optional<AdamState> adam;

  static Checkpoint capture(const ParamSet& params, const AdamState* adam = nullptr);
  /// Copies values into `params`; names and shapes must match exactly.
  void apply(ParamSet& params) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace asgnet
