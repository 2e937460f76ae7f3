#include "asgnet/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "asgnet/common.hpp"
#include "asgnet/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace asgnet {

namespace {

bool is_word_byte(unsigned char c) {
  // Bytes >= 0x80 belong to UTF-8 sequences and stay inside words.
  return std::isalnum(c) != 0 || c >= 0x80;
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

char lower(unsigned char c) { return static_cast<char>(c < 0x80 ? std::tolower(c) : c); }

bool starts_with_num_token(std::string_view s, std::size_t pos) {
  if (s.size() - pos < kNumToken.size()) return false;
  for (std::size_t k = 0; k < kNumToken.size(); ++k) {
    if (lower(static_cast<unsigned char>(s[pos + k])) != kNumToken[k]) return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(line[i]);
    if (c == '<' && starts_with_num_token(line, i)) {
      // Already-normalized input keeps its sentinel.
      out.emplace_back(kNumToken);
      i += kNumToken.size();
    } else if (is_digit(c)) {
      while (i < n && is_digit(static_cast<unsigned char>(line[i]))) ++i;
      out.emplace_back(kNumToken);
    } else if (is_word_byte(c)) {
      std::string word;
      while (i < n) {
        const auto d = static_cast<unsigned char>(line[i]);
        if (!is_word_byte(d) || is_digit(d)) break;
        word.push_back(lower(d));
        ++i;
      }
      out.push_back(std::move(word));
    } else {
      ++i;
    }
  }
  return out;
}

LabelVocab::LabelVocab(std::vector<std::string> labels) {
  for (auto& l : labels) {
    if (find(l)) throw FormatError("duplicate label '" + l + "'");
    labels_.push_back(std::move(l));
  }
}

std::optional<std::size_t> LabelVocab::find(std::string_view name) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t LabelVocab::add(std::string_view name) {
  if (auto i = find(name)) return *i;
  labels_.emplace_back(name);
  return labels_.size() - 1;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split '" + std::string(s) + "' (expected train, dev or test)");
}

SplitSpec SplitSpec::parse(std::string_view ratios, std::uint64_t seed) {
  std::vector<double> parts;
  std::string buf(ratios);
  std::stringstream ss(buf);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw FormatError("invalid split ratio '" + item + "'");
    }
  }
  if (parts.size() != 3) throw FormatError("split needs three ratios train,dev,test; got '" + buf + "'");
  SplitSpec spec{parts[0], parts[1], parts[2], seed};
  spec.validate();
  return spec;
}

void SplitSpec::validate() const {
  if (train < 0 || dev < 0 || test < 0) throw FormatError("split ratios must be non-negative");
  if (std::abs(train + dev + test - 1.0) > 1e-9) throw FormatError("split ratios must sum to 1");
}

std::vector<Split> assign_splits(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed, rng_stream::kSplit);
  rng.shuffle(order);

  const auto rounded = [n](double r) { return static_cast<std::size_t>(std::llround(r * static_cast<double>(n))); };
  const std::size_t n_train = std::min(n, rounded(spec.train));
  const std::size_t n_dev = std::min(n - n_train, rounded(spec.dev));

  std::vector<Split> splits(n, Split::kTest);
  for (std::size_t k = 0; k < n; ++k) {
    if (k < n_train) splits[order[k]] = Split::kTrain;
    else if (k < n_train + n_dev) splits[order[k]] = Split::kDev;
  }
  return splits;
}

WordVocab::WordVocab(const std::vector<std::string>& sorted_words) : words_(sorted_words) {
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<std::int32_t>(i + 2));
}

std::int32_t WordVocab::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool WordVocab::contains(std::string_view word) const { return index_.count(std::string(word)) != 0; }

LogDataset::LogDataset(std::vector<LogRecord> records, std::vector<Split> splits, LabelVocab labels)
    : records_(std::move(records)), splits_(std::move(splits)), labels_(std::move(labels)) {
  if (records_.size() != splits_.size()) throw Error("split assignment does not cover every record");
  std::set<std::string> train_words;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].label_id >= labels_.size()) throw Error("record label out of range");
    if (splits_[i] != Split::kTrain) continue;
    for (const auto& t : records_[i].tokens) train_words.insert(t);
  }
  vocab_ = WordVocab(std::vector<std::string>(train_words.begin(), train_words.end()));
}

std::vector<std::size_t> LogDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits_.size(); ++i) {
    if (splits_[i] == s) out.push_back(i);
  }
  return out;
}

std::size_t LogDataset::count(Split s) const {
  return static_cast<std::size_t>(std::count(splits_.begin(), splits_.end(), s));
}

std::uint64_t LogDataset::train_hash() const {
  Fnv1a h;
  for (const auto& l : labels_.labels()) {
    h.update(l);
    h.update("\x1f");
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (splits_[i] != Split::kTrain) continue;
    const auto& r = records_[i];
    h.update_u64(r.message_id);
    h.update_u64(r.label_id);
    for (const auto& t : r.tokens) {
      h.update(t);
      h.update("\x1f");
    }
    h.update("\x1e");
  }
  return h.digest();
}

LogDataset load_dataset(std::istream& in, const LoadOptions& options) {
  LabelVocab labels = options.labels.value_or(LabelVocab{});
  const bool fixed_labels = options.labels.has_value();
  std::vector<LogRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    if (tab1 == std::string::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": expected <label>\\t<task_id>\\t<message>");
    }
    const auto tab2 = line.find('\t', tab1 + 1);
    const std::string label = line.substr(0, tab1);
    if (label.empty()) throw FormatError("line " + std::to_string(line_no) + ": empty label");
    std::string task = line.substr(tab1 + 1, tab2 == std::string::npos ? std::string::npos : tab2 - tab1 - 1);
    const std::string message = tab2 == std::string::npos ? std::string() : line.substr(tab2 + 1);

    std::size_t label_id;
    if (fixed_labels) {
      auto found = labels.find(label);
      if (!found) {
        std::string known;
        for (const auto& l : labels.labels()) known += (known.empty() ? "" : ", ") + l;
        throw FormatError("line " + std::to_string(line_no) + ": unknown label '" + label + "' (known labels: " +
                          known + ")");
      }
      label_id = *found;
    } else {
      label_id = labels.add(label);
    }

    LogRecord rec;
    rec.message_id = records.size();
    rec.task_id = task.empty() ? "-" : std::move(task);
    rec.tokens = tokenize(message);
    rec.label_id = label_id;
    if (rec.tokens.empty() && options.warnings) {
      options.warnings->push_back("line " + std::to_string(line_no) + ": empty message accepted");
    }
    records.push_back(std::move(rec));
  }
  auto splits = assign_splits(records.size(), options.split);
  return LogDataset(std::move(records), std::move(splits), std::move(labels));
}

LogDataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");
  return load_dataset(in, options);
}

// ---------------------------------------------------------------------------
// Profiling

void WordCounts::add_line(std::string_view line) {
  ++lines;
  for (auto& t : tokenize(line)) ++counts[std::move(t)];
}

void WordCounts::merge(const WordCounts& other) {
  lines += other.lines;
  for (const auto& [w, c] : other.counts) counts[w] += c;
}

CorpusProfile summarize(const WordCounts& wc, std::uint64_t size_bytes) {
  CorpusProfile p;
  p.dataset_size_bytes = size_bytes;
  p.total_lines = wc.lines;
  p.distinct_words = wc.counts.size();
  for (const auto& [w, c] : wc.counts) {
    if (c == 1) ++p.count_appearing_once;
    if (c < 5) ++p.count_below_5;
    if (c < 10) ++p.count_below_10;
    if (c < 20) ++p.count_below_20;
    // c >= lines / K, in integers.
    if (c * 10000 >= wc.lines) ++p.count_at_least_once_per_10000_lines;
    if (c * 1000 >= wc.lines) ++p.count_at_least_once_per_1000_lines;
  }
  return p;
}

namespace {

std::string_view message_field(std::string_view line) {
  const auto t1 = line.find('\t');
  if (t1 == std::string_view::npos) return line;
  const auto t2 = line.find('\t', t1 + 1);
  return t2 == std::string_view::npos ? std::string_view() : line.substr(t2 + 1);
}

std::size_t shard_count(const ProfileOptions& options) {
  if (options.shards > 0) return options.shards;
#ifdef _OPENMP
  return static_cast<std::size_t>(std::max(1, omp_get_max_threads()));
#else
  return 1;
#endif
}

// Counts lines[begin, end) into per-shard tables, then merges them in shard
// order. Merge is commutative so the order only matters for speed.
void count_chunk(const std::vector<std::string>& lines, std::size_t begin, std::size_t end,
                 const ProfileOptions& options, WordCounts& total) {
  const std::size_t shards = std::max<std::size_t>(1, std::min(shard_count(options), end - begin));
  std::vector<WordCounts> partial(shards);
  const std::size_t span = end - begin;
#pragma omp parallel for schedule(static) if (shards > 1)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(shards); ++s) {
    const std::size_t lo = begin + span * static_cast<std::size_t>(s) / shards;
    const std::size_t hi = begin + span * static_cast<std::size_t>(s + 1) / shards;
    auto& wc = partial[static_cast<std::size_t>(s)];
    for (std::size_t i = lo; i < hi; ++i) {
      const std::string_view l = lines[i];
      wc.add_line(options.labeled ? message_field(l) : l);
    }
  }
  for (const auto& p : partial) total.merge(p);
}

}  // namespace

CorpusProfile profile_lines(const std::vector<std::string>& lines, std::uint64_t size_bytes,
                            const ProfileOptions& options) {
  WordCounts total;
  if (!lines.empty()) count_chunk(lines, 0, lines.size(), options, total);
  return summarize(total, size_bytes);
}

CorpusProfile profile_corpus(const std::filesystem::path& path, const ProfileOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read corpus '" + path.string() + "'");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error("cannot stat corpus '" + path.string() + "': " + ec.message());

  constexpr std::size_t kChunkLines = 1 << 16;
  WordCounts total;
  std::vector<std::string> chunk;
  chunk.reserve(kChunkLines);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    chunk.push_back(std::move(line));
    if (chunk.size() == kChunkLines) {
      count_chunk(chunk, 0, chunk.size(), options, total);
      chunk.clear();
    }
  }
  if (!chunk.empty()) count_chunk(chunk, 0, chunk.size(), options, total);
  return summarize(total, size);
}

namespace {

struct ProfileField {
  const char* name;
  std::uint64_t CorpusProfile::*member;
  bool has_fraction;
};

constexpr ProfileField kProfileFields[] = {
    {"dataset_size_bytes", &CorpusProfile::dataset_size_bytes, false},
    {"total_lines", &CorpusProfile::total_lines, false},
    {"distinct_words", &CorpusProfile::distinct_words, false},
    {"count_appearing_once", &CorpusProfile::count_appearing_once, true},
    {"count_below_5", &CorpusProfile::count_below_5, true},
    {"count_below_10", &CorpusProfile::count_below_10, true},
    {"count_below_20", &CorpusProfile::count_below_20, true},
    {"count_at_least_once_per_10000_lines", &CorpusProfile::count_at_least_once_per_10000_lines, true},
    {"count_at_least_once_per_1000_lines", &CorpusProfile::count_at_least_once_per_1000_lines, true},
};

}  // namespace

void write_profile_text(std::ostream& out, const CorpusProfile& p) {
  const auto row = [&](const char* label, std::uint64_t v) {
    out << std::left << std::setw(40) << label << std::right << std::setw(14) << v << "  (" << std::fixed
        << std::setprecision(2) << 100.0 * p.fraction(v) << "%)\n";
  };
  out << std::left << std::setw(40) << "dataset size (bytes)" << std::right << std::setw(14) << p.dataset_size_bytes
      << '\n';
  out << std::left << std::setw(40) << "total lines" << std::right << std::setw(14) << p.total_lines << '\n';
  out << std::left << std::setw(40) << "distinct words" << std::right << std::setw(14) << p.distinct_words << '\n';
  row("appear only once", p.count_appearing_once);
  row("appear less than 5 times", p.count_below_5);
  row("appear less than 10 times", p.count_below_10);
  row("appear less than 20 times", p.count_below_20);
  row("appear at least once per 10000 lines", p.count_at_least_once_per_10000_lines);
  row("appear at least once per 1000 lines", p.count_at_least_once_per_1000_lines);
  out << "note: 'at least once per K lines' counts words whose occurrence count >= total_lines / K\n";
  out.unsetf(std::ios::floatfield);
}

void write_profile_kv(std::ostream& out, const CorpusProfile& p) {
  const auto old_precision = out.precision(17);
  for (const auto& f : kProfileFields) {
    out << f.name << ' ' << p.*(f.member) << '\n';
    if (f.has_fraction) out << f.name << "_fraction " << p.fraction(p.*(f.member)) << '\n';
  }
  out.precision(old_precision);
}

CorpusProfile read_profile_kv(std::istream& in) {
  CorpusProfile p;
  std::string key;
  std::string value;
  while (in >> key >> value) {
    if (key.ends_with("_fraction")) continue;
    bool known = false;
    for (const auto& f : kProfileFields) {
      if (key == f.name) {
        p.*(f.member) = std::stoull(value);
        known = true;
      }
    }
    if (!known) throw FormatError("unknown profile field '" + key + "'");
  }
  return p;
}

}  // namespace asgnet
