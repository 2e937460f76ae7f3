#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "asgnet/gnet.hpp"

namespace asgnet {

/// Every knob of a training run. Serialized as flat `key = value` lines;
/// '#' starts a comment; unknown keys are rejected.
struct RunConfig {
  std::string dataset;
  /// Comma-separated label order. Empty: labels in order of first appearance.
  std::string labels;
  std::string split = "0.8,0.1,0.1";
  std::uint64_t seed = 7;
  std::size_t m_fixed = 16;
  std::size_t d_model = 64;
  std::size_t d_z = 16;
  double epsilon = 0.2;
  double learning_rate = 2e-3;
  std::size_t batch_size = 32;
  std::size_t vae_epochs = 30;
  std::size_t epochs = 30;
  double vae_learning_rate = 2e-3;
  double kl_weight = 1.0;
  /// Train-split messages get statistics with their own counts removed.
  bool stats_holdout = true;
  FusionMode mode = FusionMode::kFull;

  /// Throws on out-of-range values.
  void validate() const;

  /// Applies one `key=value` assignment.
  void set(std::string_view key, std::string_view value);
  void apply_override(std::string_view assignment);

  /// Canonical text form, every key in a fixed order.
  std::string to_text() const;
  /// Label list parsed from `labels`; empty when unset.
  std::vector<std::string> label_list() const;

  static RunConfig parse(std::istream& in);
  static RunConfig load(const std::filesystem::path& path);
  static const std::vector<std::string>& keys();

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace asgnet
