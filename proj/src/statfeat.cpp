#include "asgnet/statfeat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "asgnet/common.hpp"

namespace asgnet {

StatDictionary::StatDictionary(LabelVocab labels, std::uint64_t train_hash, std::map<std::string, StatVector> table)
    : labels_(std::move(labels)), train_hash_(train_hash), table_(std::move(table)) {
  for (const auto& [w, v] : table_) {
    if (v.size() != labels_.size()) throw FormatError("stat vector for '" + w + "' has wrong label dimension");
  }
}

StatVector StatDictionary::lookup(std::string_view word) const {
  auto it = table_.find(std::string(word));
  if (it == table_.end()) return StatVector(labels_.size(), 0);
  return it->second;
}

std::uint64_t StatDictionary::content_hash() const {
  std::ostringstream ss;
  write_stat_dictionary(ss, *this);
  Fnv1a h;
  h.update(ss.str());
  return h.digest();
}

StatDictionary build_stat_dictionary(const LogDataset& dataset) {
  const auto train = dataset.indices(Split::kTrain);
  if (train.empty()) throw Error("cannot build statistics dictionary: train split is empty");
  const std::size_t n = dataset.labels().size();
  std::map<std::string, StatVector> table;
  for (std::size_t idx : train) {
    const auto& rec = dataset.records()[idx];
    for (const auto& t : rec.tokens) {
      auto [it, inserted] = table.try_emplace(t);
      if (inserted) it->second.assign(n, 0);
      ++it->second[rec.label_id];
    }
  }
  return StatDictionary(dataset.labels(), dataset.train_hash(), std::move(table));
}

namespace {

MessageStatInput stack_stats(const StatDictionary& dict, const LogRecord& record, std::size_t m_fixed,
                             bool held_out) {
  if (m_fixed == 0) throw Error("m_fixed must be at least 1");
  MessageStatInput in;
  in.rows = m_fixed;
  in.cols = dict.label_count();
  in.matrix.assign(in.rows * in.cols, 0);
  in.mask.assign(in.rows, 0);
  in.pooled.assign(in.cols, 0);
  if (held_out && record.label_id >= in.cols) throw Error("held-out statistics: label outside dictionary");
  std::map<std::string_view, std::uint64_t> own;
  if (held_out) {
    for (const auto& t : record.tokens) ++own[t];
  }
  const std::size_t used = std::min(m_fixed, record.tokens.size());
  for (std::size_t r = 0; r < used; ++r) {
    in.mask[r] = 1;
    auto v = dict.lookup(record.tokens[r]);
    if (held_out) {
      auto& c = v[record.label_id];
      const std::uint64_t mine = own[record.tokens[r]];
      if (c < mine) throw Error("held-out statistics: token '" + record.tokens[r] + "' of this message was not counted in the dictionary");
      c -= mine;
    }
    for (std::size_t c = 0; c < in.cols; ++c) {
      in.matrix[r * in.cols + c] = v[c];
      in.pooled[c] += v[c];
    }
  }
  in.normalized.resize(in.cols);
  for (std::size_t c = 0; c < in.cols; ++c) in.normalized[c] = std::log1p(static_cast<double>(in.pooled[c]));
  return in;
}

}  // namespace

MessageStatInput message_stats(const StatDictionary& dict, const LogRecord& record, std::size_t m_fixed) {
  return stack_stats(dict, record, m_fixed, false);
}

std::vector<double> normalized_stats(const StatDictionary& dict, const LogRecord& record, std::size_t m_fixed) {
  return message_stats(dict, record, m_fixed).normalized;
}

MessageStatInput held_out_message_stats(const StatDictionary& dict, const LogRecord& record, std::size_t m_fixed) {
  return stack_stats(dict, record, m_fixed, true);
}

std::vector<double> held_out_normalized_stats(const StatDictionary& dict, const LogRecord& record,
                                              std::size_t m_fixed) {
  return held_out_message_stats(dict, record, m_fixed).normalized;
}

void write_stat_dictionary(std::ostream& out, const StatDictionary& dict) {
  out << "#asgnet-stats v1\n#labels";
  for (const auto& l : dict.labels().labels()) out << '\t' << l;
  out << "\n#train_hash\t" << to_hex(dict.train_hash()) << '\n';
  for (const auto& [w, v] : dict.table()) {
    out << w << '\t';
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    out << '\n';
  }
}

void save_stat_dictionary(const std::filesystem::path& path, const StatDictionary& dict) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write statistics table '" + path.string() + "'");
  write_stat_dictionary(out, dict);
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto t = line.find('\t', start);
    parts.push_back(line.substr(start, t == std::string::npos ? std::string::npos : t - start));
    if (t == std::string::npos) break;
    start = t + 1;
  }
  return parts;
}

}  // namespace

StatDictionary read_stat_dictionary(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "#asgnet-stats v1") throw FormatError("statistics table: bad magic line");
  if (!std::getline(in, line)) throw FormatError("statistics table: missing #labels header");
  auto label_parts = split_tabs(line);
  if (label_parts.empty() || label_parts[0] != "#labels") throw FormatError("statistics table: missing #labels header");
  LabelVocab labels(std::vector<std::string>(label_parts.begin() + 1, label_parts.end()));
  if (!std::getline(in, line)) throw FormatError("statistics table: missing #train_hash header");
  auto hash_parts = split_tabs(line);
  if (hash_parts.size() != 2 || hash_parts[0] != "#train_hash") {
    throw FormatError("statistics table: missing #train_hash header");
  }
  const std::uint64_t train_hash = from_hex(hash_parts[1]);

  std::map<std::string, StatVector> table;
  std::size_t line_no = 3;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("statistics table line " + std::to_string(line_no) + ": no tab");
    StatVector v;
    std::stringstream counts(line.substr(tab + 1));
    std::string item;
    while (std::getline(counts, item, ',')) {
      try {
        v.push_back(std::stoull(item));
      } catch (const std::exception&) {
        throw FormatError("statistics table line " + std::to_string(line_no) + ": bad count '" + item + "'");
      }
    }
    if (v.size() != labels.size()) {
      throw FormatError("statistics table line " + std::to_string(line_no) + ": expected " +
                        std::to_string(labels.size()) + " counts");
    }
    table.emplace(line.substr(0, tab), std::move(v));
  }
  return StatDictionary(std::move(labels), train_hash, std::move(table));
}

StatDictionary load_stat_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read statistics table '" + path.string() + "'");
  return read_stat_dictionary(in);
}

}  // namespace asgnet
