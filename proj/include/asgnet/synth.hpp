#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace asgnet {

/// Labeled synthetic corpus description, read from JSON:
///
///   {
///     "messages_per_label": 500,
///     "filler_vocab": 40,
///     "pools": { "disk": { "size": 300 } },
///     "labels": [
///       { "name": "Stream exception", "rare_rate": 1.0,
///         "templates": ["stream {filler} closed {rare:disk} at {num}"] }
///     ]
///   }
///
/// Template placeholders: {num} a random integer, {filler} a word from the
/// shared filler vocabulary, {rare:POOL} a word drawn uniformly from POOL with
/// probability rare_rate (otherwise a filler word), {any:a|b|c} one of the
/// listed words.
struct SynthPool {
  std::string name;
  std::size_t size = 0;
};

struct SynthLabel {
  std::string name;
  std::vector<std::string> templates;
  double rare_rate = 1.0;
};

struct SynthSpec {
  std::size_t messages_per_label = 0;
  std::size_t filler_vocab = 40;
  std::vector<SynthPool> pools;
  std::vector<SynthLabel> labels;

  static SynthSpec parse_json(const std::string& text);
  static SynthSpec load(const std::filesystem::path& path);
  void validate() const;
};

struct SynthManifest {
  std::uint64_t seed = 0;
  std::size_t lines = 0;
  std::map<std::string, std::size_t> per_label;
  /// Rare slots encountered, and how many were filled from a pool.
  std::size_t rare_slots = 0;
  std::map<std::string, std::size_t> rare_injected;
  std::map<std::string, std::size_t> rare_slots_by_pool;
  double expected_rare_rate_mean = 0.0;

  std::string to_json() const;
};

/// Word `index` of pool `pool_name`. Letters only, so tokenization keeps it
/// intact; distinct pools never share words.
std::string pool_word(const std::string& pool_name, std::size_t index);
std::string filler_word(std::size_t index);

/// Writes `<label>\t<task_id>\t<message>` lines in a seeded random order.
SynthManifest generate_synthetic(const SynthSpec& spec, std::uint64_t seed, std::ostream& out);
SynthManifest generate_synthetic(const SynthSpec& spec, std::uint64_t seed, const std::filesystem::path& corpus_path);

}  // namespace asgnet
