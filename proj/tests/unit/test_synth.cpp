#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"

#include "asgnet/common.hpp"
#include "asgnet/corpus.hpp"
#include "asgnet/synth.hpp"

using namespace asgnet;

namespace {

const char* kSpec = R"({
  "messages_per_label": 500,
  "filler_vocab": 30,
  "pools": { "net": { "size": 50 }, "disk": { "size": 50 } },
  "labels": [
    { "name": "Connection broken", "rare_rate": 0.3,
      "templates": ["link {rare:net} dropped after {num} ms", "peer {filler} {rare:net} reset"] },
    { "name": "Disk failure", "rare_rate": 0.8, "templates": ["write {rare:disk} failed on {any:sda|sdb}"] },
    { "name": "Task timeout", "templates": ["task {filler} exceeded {num} s"] },
    { "name": "Memory exhausted", "rare_rate": 0.0, "templates": ["alloc {rare:disk} {filler} oom"] }
  ]
})";

std::string generate(const SynthSpec& spec, std::uint64_t seed, SynthManifest* manifest = nullptr) {
  std::ostringstream out;
  auto m = generate_synthetic(spec, seed, out);
  if (manifest) *manifest = m;
  return out.str();
}

}  // namespace

TEST_CASE("4 labels x 500 gives 2000 lines") {
  const auto spec = SynthSpec::parse_json(kSpec);
  SynthManifest m;
  const auto text = generate(spec, 7, &m);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2000);
  CHECK(m.lines == 2000);
  CHECK(m.per_label.at("Disk failure") == 500);

  std::istringstream in(text);
  LoadOptions opts;
  const auto ds = load_dataset(in, opts);
  CHECK(ds.records().size() == 2000);
  CHECK(ds.labels().size() == 4);
}

TEST_CASE("same seed gives a byte-identical corpus, another seed does not") {
  const auto spec = SynthSpec::parse_json(kSpec);
  CHECK(generate(spec, 7) == generate(spec, 7));
  CHECK(generate(spec, 7) != generate(spec, 8));

  const auto dir = std::filesystem::temp_directory_path() / "asgnet_synth_test";
  generate_synthetic(spec, 7, dir / "a.log");
  std::ifstream in(dir / "a.log", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == generate(spec, 7));
  CHECK(std::filesystem::exists(dir / "a.log.manifest.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("rare words appear at the configured rate within binomial tolerance") {
  const auto spec = SynthSpec::parse_json(kSpec);
  SynthManifest m;
  const auto text = generate(spec, 11, &m);

  // Count pool words per label straight from the text. Every template except
  // the timeout one has exactly one rare slot.
  std::map<std::string, std::pair<double, double>> per_label;  // label -> (slots, hits)
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto label = line.substr(0, line.find('\t'));
    const auto message = line.substr(line.rfind('\t') + 1);
    std::size_t hits = 0;
    for (const auto& tok : tokenize(message)) {
      if (tok.rfind("net", 0) == 0 && tok.size() == 6) ++hits;
      if (tok.rfind("disk", 0) == 0 && tok.size() == 7) ++hits;
    }
    if (label == "Task timeout") continue;
    per_label[label].first += 1.0;
    per_label[label].second += static_cast<double>(hits);
  }
  const std::map<std::string, double> rate{{"Connection broken", 0.3}, {"Disk failure", 0.8}, {"Memory exhausted", 0.0}};
  for (const auto& [label, counts] : per_label) {
    const double n = counts.first;
    const double p = rate.at(label);
    const double sd = std::sqrt(n * p * (1 - p));
    CHECK_MESSAGE(std::abs(counts.second - n * p) <= 4.0 * sd, label);
  }
  // The manifest agrees with the text.
  CHECK(m.rare_slots == 1500);
  CHECK(m.rare_injected["net"] + m.rare_injected["disk"] ==
        static_cast<std::size_t>(per_label["Connection broken"].second + per_label["Disk failure"].second +
                                 per_label["Memory exhausted"].second));
}

TEST_CASE("pool and filler words survive tokenization and never collide") {
  CHECK(tokenize(pool_word("net", 27)) == std::vector<std::string>{pool_word("net", 27)});
  CHECK(pool_word("net", 0) != pool_word("net", 1));
  CHECK(pool_word("ab", 0) != filler_word(0));
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(SynthSpec::parse_json("{"), FormatError);
  CHECK_THROWS_AS(SynthSpec::parse_json(R"({"messages_per_label": 0, "labels": [{"name": "a", "templates": ["x"]}]})"),
                  FormatError);
  CHECK_THROWS_AS(SynthSpec::parse_json(R"({"messages_per_label": 5, "labels": []})"), FormatError);
  CHECK_THROWS_AS(SynthSpec::parse_json(R"({"messages_per_label": 5, "labels": [{"name": "a", "templates": ["{rare:zz}"]}]})"),
                  FormatError);
  CHECK_THROWS_AS(SynthSpec::parse_json(R"({"messages_per_label": 5, "labels": [{"name": "a", "templates": ["{what}"]}]})"),
                  FormatError);
  CHECK_THROWS_AS(
      SynthSpec::parse_json(R"({"messages_per_label": 5, "labels": [{"name": "a", "rare_rate": 2, "templates": ["x"]}]})"),
      FormatError);
}

TEST_CASE("bundled corpora match their specs") {
  const std::filesystem::path root = ASGNET_SOURCE_DIR;
  for (const char* name : {"synth_default", "synth_joint"}) {
    const auto spec = SynthSpec::load(root / "data" / (std::string(name) + ".json"));
    std::ifstream in(root / "data" / (std::string(name) + ".log"), std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK_MESSAGE(ss.str() == generate(spec, 7), name);
  }
}
