#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "asgnet/corpus.hpp"

namespace asgnet {

/// Per-label occurrence counts of one word.
using StatVector = std::vector<std::uint64_t>;

/// Word -> per-label token counts, built from the train split only.
class StatDictionary {
 public:
  StatDictionary() = default;
  StatDictionary(LabelVocab labels, std::uint64_t train_hash, std::map<std::string, StatVector> table);

  /// Stored vector, or all zeros for words not seen in training.
  StatVector lookup(std::string_view word) const;
  bool contains(std::string_view word) const { return table_.find(std::string(word)) != table_.end(); }

  const LabelVocab& labels() const { return labels_; }
  std::size_t label_count() const { return labels_.size(); }
  std::uint64_t train_hash() const { return train_hash_; }
  const std::map<std::string, StatVector>& table() const { return table_; }
  std::size_t size() const { return table_.size(); }

  /// Hash of the serialized table; identifies the dictionary in downstream
  /// artifacts.
  std::uint64_t content_hash() const;

  friend bool operator==(const StatDictionary&, const StatDictionary&) = default;

 private:
  LabelVocab labels_;
  std::uint64_t train_hash_ = 0;
  std::map<std::string, StatVector> table_;
};

/// Counts token occurrences (not document frequency) per label over the
/// train split. Throws if the train split is empty.
StatDictionary build_stat_dictionary(const LogDataset& dataset);

struct MessageStatInput {
  /// m_fixed rows of label_count entries, row-major.
  std::vector<std::uint64_t> matrix;
  /// 1 for token rows, 0 for padding.
  std::vector<std::uint8_t> mask;
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// Column sums of matrix.
  std::vector<std::uint64_t> pooled;
  /// log(1 + pooled).
  std::vector<double> normalized;

  std::uint64_t at(std::size_t r, std::size_t c) const { return matrix[r * cols + c]; }
};

/// Pads or truncates the token list to m_fixed (first tokens kept) and stacks
/// the per-word vectors.
MessageStatInput message_stats(const StatDictionary& dict, const LogRecord& record, std::size_t m_fixed);

/// Pooled and normalized vector without materializing the padded matrix.
std::vector<double> normalized_stats(const StatDictionary& dict, const LogRecord& record, std::size_t m_fixed);

/// As message_stats for a message that was itself counted into `dict`: its
/// own token occurrences are subtracted first, so a training message sees the
/// statistics the rest of the train split gives it.
MessageStatInput held_out_message_stats(const StatDictionary& dict, const LogRecord& record, std::size_t m_fixed);
std::vector<double> held_out_normalized_stats(const StatDictionary& dict, const LogRecord& record,
                                              std::size_t m_fixed);

/// Table format:
///   #asgnet-stats v1
///   #labels<TAB>label_1<TAB>...<TAB>label_n
///   #train_hash<TAB><16 hex digits>
///   word<TAB>count_1,...,count_n      (sorted by word, byte order)
void write_stat_dictionary(std::ostream& out, const StatDictionary& dict);
void save_stat_dictionary(const std::filesystem::path& path, const StatDictionary& dict);
StatDictionary read_stat_dictionary(std::istream& in);
StatDictionary load_stat_dictionary(const std::filesystem::path& path);

}  // namespace asgnet
