#include "asgnet/synth.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "asgnet/common.hpp"
#include "asgnet/rng.hpp"

namespace asgnet {

namespace {

constexpr std::size_t kIndexLetters = 3;
constexpr std::size_t kMaxPoolSize = 26 * 26 * 26;

std::string letters(std::size_t index) {
  std::string s(kIndexLetters, 'a');
  for (std::size_t i = 0; i < kIndexLetters; ++i) {
    s[kIndexLetters - 1 - i] = static_cast<char>('a' + index % 26);
    index /= 26;
  }
  return s;
}

bool lowercase_word(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < 'a' || c > 'z') return false;
  }
  return true;
}

}  // namespace

std::string pool_word(const std::string& pool_name, std::size_t index) { return pool_name + letters(index); }
std::string filler_word(std::size_t index) { return "w" + letters(index); }

SynthSpec SynthSpec::parse_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  SynthSpec spec;
  try {
    spec.messages_per_label = j.at("messages_per_label").get<std::size_t>();
    spec.filler_vocab = j.value("filler_vocab", std::size_t{40});
    if (j.contains("pools")) {
      for (const auto& [name, body] : j.at("pools").items()) {
        spec.pools.push_back({name, body.at("size").get<std::size_t>()});
      }
    }
    for (const auto& l : j.at("labels")) {
      SynthLabel label;
      label.name = l.at("name").get<std::string>();
      label.templates = l.at("templates").get<std::vector<std::string>>();
      label.rare_rate = l.value("rare_rate", 1.0);
      spec.labels.push_back(std::move(label));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SynthSpec SynthSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read synthetic spec '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

void SynthSpec::validate() const {
  const auto fail = [](const std::string& m) { throw FormatError("synthetic spec: " + m); };
  if (messages_per_label == 0) fail("messages_per_label must be positive");
  if (filler_vocab == 0 || filler_vocab > kMaxPoolSize) fail("filler_vocab must be in [1, 17576]");
  if (labels.empty()) fail("no labels");
  for (const auto& p : pools) {
    if (!lowercase_word(p.name) || p.name.size() < 2) fail("pool name '" + p.name + "' must be >= 2 lowercase letters");
    if (p.size == 0 || p.size > kMaxPoolSize) fail("pool '" + p.name + "' size must be in [1, 17576]");
  }
  for (const auto& l : labels) {
    if (l.name.empty() || l.name.find('\t') != std::string::npos) fail("label names must be non-empty, tab-free");
    if (l.templates.empty()) fail("label '" + l.name + "' has no templates");
    if (!(l.rare_rate >= 0.0 && l.rare_rate <= 1.0)) fail("label '" + l.name + "' rare_rate outside [0, 1]");
    for (const auto& t : l.templates) {
      std::size_t pos = 0;
      while ((pos = t.find('{', pos)) != std::string::npos) {
        const auto close = t.find('}', pos);
        if (close == std::string::npos) fail("unterminated placeholder in '" + t + "'");
        const std::string ph = t.substr(pos + 1, close - pos - 1);
        if (ph.rfind("rare:", 0) == 0) {
          const std::string pool = ph.substr(5);
          bool found = false;
          for (const auto& p : pools) found = found || p.name == pool;
          if (!found) fail("template refers to unknown pool '" + pool + "'");
        } else if (ph != "num" && ph != "filler" && ph.rfind("any:", 0) != 0) {
          fail("unknown placeholder {" + ph + "}");
        }
        pos = close + 1;
      }
    }
  }
}

std::string SynthManifest::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["lines"] = lines;
  j["per_label"] = per_label;
  j["rare_slots"] = rare_slots;
  j["rare_slots_by_pool"] = rare_slots_by_pool;
  j["rare_injected"] = rare_injected;
  j["expected_rare_rate_mean"] = expected_rare_rate_mean;
  return j.dump(2) + "\n";
}

SynthManifest generate_synthetic(const SynthSpec& spec, std::uint64_t seed, std::ostream& out) {
  spec.validate();
  Rng rng(seed, rng_stream::kSynth);
  std::map<std::string, std::size_t> pool_size;
  for (const auto& p : spec.pools) pool_size[p.name] = p.size;

  SynthManifest manifest;
  manifest.seed = seed;
  double rate_sum = 0.0;
  std::vector<std::string> lines;
  lines.reserve(spec.messages_per_label * spec.labels.size());
  for (const auto& label : spec.labels) {
    for (std::size_t i = 0; i < spec.messages_per_label; ++i) {
      const std::string& tmpl = label.templates[rng.below(label.templates.size())];
      std::string msg;
      std::size_t pos = 0;
      while (pos < tmpl.size()) {
        const auto open = tmpl.find('{', pos);
        if (open == std::string::npos) {
          msg += tmpl.substr(pos);
          break;
        }
        msg += tmpl.substr(pos, open - pos);
        const auto close = tmpl.find('}', open);
        const std::string ph = tmpl.substr(open + 1, close - open - 1);
        if (ph == "num") {
          msg += std::to_string(rng.below(100000));
        } else if (ph == "filler") {
          msg += filler_word(rng.below(spec.filler_vocab));
        } else if (ph.rfind("any:", 0) == 0) {
          std::vector<std::string> options;
          std::stringstream ss(ph.substr(4));
          std::string item;
          while (std::getline(ss, item, '|')) options.push_back(item);
          msg += options.empty() ? std::string() : options[rng.below(options.size())];
        } else {
          const std::string pool = ph.substr(5);
          ++manifest.rare_slots;
          ++manifest.rare_slots_by_pool[pool];
          rate_sum += label.rare_rate;
          if (rng.bernoulli(label.rare_rate)) {
            msg += pool_word(pool, rng.below(pool_size.at(pool)));
            ++manifest.rare_injected[pool];
          } else {
            msg += filler_word(rng.below(spec.filler_vocab));
          }
        }
        pos = close + 1;
      }
      lines.push_back(label.name + "\tt" + std::to_string(lines.size()) + "\t" + msg);
      ++manifest.per_label[label.name];
    }
  }
  rng.shuffle(lines);
  for (const auto& l : lines) out << l << '\n';
  manifest.lines = lines.size();
  manifest.expected_rare_rate_mean = manifest.rare_slots ? rate_sum / static_cast<double>(manifest.rare_slots) : 0.0;
  return manifest;
}

SynthManifest generate_synthetic(const SynthSpec& spec, std::uint64_t seed, const std::filesystem::path& corpus_path) {
  if (corpus_path.has_parent_path()) std::filesystem::create_directories(corpus_path.parent_path());
  std::ofstream out(corpus_path, std::ios::binary);
  if (!out) throw Error("cannot write corpus '" + corpus_path.string() + "'");
  auto manifest = generate_synthetic(spec, seed, out);
  std::ofstream man(corpus_path.string() + ".manifest.json", std::ios::binary);
  man << manifest.to_json();
  return manifest;
}

}  // namespace asgnet
