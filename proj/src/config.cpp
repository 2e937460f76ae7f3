#include "asgnet/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "asgnet/common.hpp"
#include "asgnet/corpus.hpp"

namespace asgnet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("config key '" + std::string(key) + "': invalid value '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw FormatError("config key '" + std::string(key) + "': expected true or false, got '" + std::string(value) + "'");
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "dataset", "labels",     "split",          "seed",          "m_fixed",
      "d_model", "d_z",        "epsilon",        "learning_rate", "batch_size",
      "vae_epochs", "epochs",  "vae_learning_rate", "kl_weight",  "stats_holdout", "mode"};
  return k;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "dataset") dataset = value;
  else if (key == "labels") labels = value;
  else if (key == "split") split = value;
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "m_fixed") m_fixed = parse_number<std::size_t>(key, value);
  else if (key == "d_model") d_model = parse_number<std::size_t>(key, value);
  else if (key == "d_z") d_z = parse_number<std::size_t>(key, value);
  else if (key == "epsilon") epsilon = parse_number<double>(key, value);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "vae_epochs") vae_epochs = parse_number<std::size_t>(key, value);
  else if (key == "epochs") epochs = parse_number<std::size_t>(key, value);
  else if (key == "vae_learning_rate") vae_learning_rate = parse_number<double>(key, value);
  else if (key == "kl_weight") kl_weight = parse_number<double>(key, value);
  else if (key == "stats_holdout") stats_holdout = parse_bool(key, value);
  else if (key == "mode") mode = parse_mode(value);
  else {
    std::string known;
    for (const auto& k : keys()) known += (known.empty() ? "" : ", ") + k;
    throw FormatError("unknown config key '" + std::string(key) + "' (known keys: " + known + ")");
  }
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw FormatError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw FormatError("invalid config: " + msg); };
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) fail("epsilon must lie in [0, 0.5]");
  if (m_fixed == 0) fail("m_fixed must be positive");
  if (d_model == 0) fail("d_model must be positive");
  if (d_z == 0) fail("d_z must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(vae_learning_rate > 0.0)) fail("vae_learning_rate must be positive");
  if (!(kl_weight >= 0.0)) fail("kl_weight must be non-negative");
  SplitSpec::parse(split, seed);
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "dataset = " << dataset << '\n';
  out << "labels = " << labels << '\n';
  out << "split = " << split << '\n';
  out << "seed = " << seed << '\n';
  out << "m_fixed = " << m_fixed << '\n';
  out << "d_model = " << d_model << '\n';
  out << "d_z = " << d_z << '\n';
  out << "epsilon = " << format_double(epsilon) << '\n';
  out << "learning_rate = " << format_double(learning_rate) << '\n';
  out << "batch_size = " << batch_size << '\n';
  out << "vae_epochs = " << vae_epochs << '\n';
  out << "epochs = " << epochs << '\n';
  out << "vae_learning_rate = " << format_double(vae_learning_rate) << '\n';
  out << "kl_weight = " << format_double(kl_weight) << '\n';
  out << "stats_holdout = " << (stats_holdout ? "true" : "false") << '\n';
  out << "mode = " << mode_name(mode) << '\n';
  return out.str();
}

std::vector<std::string> RunConfig::label_list() const {
  std::vector<std::string> out;
  std::stringstream ss(labels);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(trim(body.substr(0, eq)), body.substr(eq + 1));
    } catch (const FormatError& e) {
      throw FormatError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config '" + path.string() + "'");
  return parse(in);
}

}  // namespace asgnet
