#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace asgnet {

/// Replacement token for every maximal run of decimal digits.
inline constexpr std::string_view kNumToken = "<num>";

/// Lowercases, splits on whitespace and non-alphanumeric boundaries and
/// collapses digit runs to kNumToken. Blank or punctuation-only lines give an
/// empty result.
std::vector<std::string> tokenize(std::string_view line);

class LabelVocab {
 public:
  LabelVocab() = default;
  explicit LabelVocab(std::vector<std::string> labels);

  std::optional<std::size_t> find(std::string_view name) const;
  /// Returns the existing index or appends.
  std::size_t add(std::string_view name);

  const std::string& name(std::size_t id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  friend bool operator==(const LabelVocab&, const LabelVocab&) = default;

 private:
  std::vector<std::string> labels_;
};

struct LogRecord {
  std::uint64_t message_id = 0;
  std::string task_id;
  std::vector<std::string> tokens;
  std::size_t label_id = 0;
};

enum class Split : std::uint8_t { kTrain = 0, kDev = 1, kTest = 2 };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);

struct SplitSpec {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
  std::uint64_t seed = 7;

  /// Parses "0.8,0.1,0.1". Ratios must be non-negative and sum to 1.
  static SplitSpec parse(std::string_view ratios, std::uint64_t seed);
  void validate() const;
};

/// Word ids for the semantic encoder. Ids 0 and 1 are reserved.
class WordVocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  WordVocab() = default;
  explicit WordVocab(const std::vector<std::string>& sorted_words);

  std::int32_t id(std::string_view word) const;
  bool contains(std::string_view word) const;
  std::size_t size() const { return words_.size() + 2; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Labeled corpus with a fixed split assignment. Immutable once loaded.
class LogDataset {
 public:
  LogDataset(std::vector<LogRecord> records, std::vector<Split> splits, LabelVocab labels);

  const std::vector<LogRecord>& records() const { return records_; }
  const LabelVocab& labels() const { return labels_; }
  const WordVocab& vocab() const { return vocab_; }
  Split split_of(std::size_t index) const { return splits_.at(index); }
  const std::vector<Split>& splits() const { return splits_; }

  /// Record indices (positions in records()) belonging to `s`, ascending.
  std::vector<std::size_t> indices(Split s) const;
  std::size_t count(Split s) const;

  /// Hash of the train split content: ids, labels and tokens in order.
  std::uint64_t train_hash() const;

 private:
  std::vector<LogRecord> records_;
  std::vector<Split> splits_;
  LabelVocab labels_;
  WordVocab vocab_;
};

struct LoadOptions {
  SplitSpec split;
  /// When set, labels outside this list are rejected. Otherwise labels are
  /// collected in order of first appearance.
  std::optional<LabelVocab> labels;
  /// Receives warnings such as accepted empty messages.
  std::vector<std::string>* warnings = nullptr;
};

/// Parses `<label>\t<task_id>\t<message>` lines. Empty lines are skipped.
LogDataset load_dataset(std::istream& in, const LoadOptions& options);
LogDataset load_dataset(const std::filesystem::path& path, const LoadOptions& options);

/// Deterministic split: seeded Fisher-Yates over record positions, then the
/// first round(train*N) go to train, the next round(dev*N) to dev, the rest
/// to test.
std::vector<Split> assign_splits(std::size_t n, const SplitSpec& spec);

struct CorpusProfile {
  std::uint64_t dataset_size_bytes = 0;
  std::uint64_t total_lines = 0;
  std::uint64_t distinct_words = 0;
  std::uint64_t count_appearing_once = 0;
  std::uint64_t count_below_5 = 0;
  std::uint64_t count_below_10 = 0;
  std::uint64_t count_below_20 = 0;
  std::uint64_t count_at_least_once_per_10000_lines = 0;
  std::uint64_t count_at_least_once_per_1000_lines = 0;

  double fraction(std::uint64_t count) const {
    return distinct_words == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(distinct_words);
  }

  friend bool operator==(const CorpusProfile&, const CorpusProfile&) = default;
};

/// Word occurrence counts. Merging is count addition, so shard order does
/// not affect the result.
struct WordCounts {
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t lines = 0;

  void add_line(std::string_view line);
  void merge(const WordCounts& other);
};

CorpusProfile summarize(const WordCounts& counts, std::uint64_t size_bytes);

struct ProfileOptions {
  /// Profile only the message field of labeled lines.
  bool labeled = false;
  /// Shards processed in parallel when OpenMP is available; 0 picks the
  /// thread count.
  std::size_t shards = 0;
};

/// Single pass over the file. "At least once per K lines" means the word's
/// occurrence count is >= total_lines / K.
CorpusProfile profile_corpus(const std::filesystem::path& path, const ProfileOptions& options = {});
CorpusProfile profile_lines(const std::vector<std::string>& lines, std::uint64_t size_bytes,
                            const ProfileOptions& options = {});

/// Human-readable report.
void write_profile_text(std::ostream& out, const CorpusProfile& p);
/// One `field value` pair per line, field names as in CorpusProfile.
void write_profile_kv(std::ostream& out, const CorpusProfile& p);
CorpusProfile read_profile_kv(std::istream& in);

}  // namespace asgnet
