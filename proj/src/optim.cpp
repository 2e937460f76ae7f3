#include "asgnet/optim.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "asgnet/common.hpp"

namespace asgnet {

Tensor& ParamSet::add(std::string name, Tensor t) {
  for (const auto& p : params_) {
    if (p.name == name) throw Error("duplicate parameter name '" + name + "'");
  }
  params_.push_back({std::move(name), std::move(t)});
  return params_.back().tensor;
}

const Tensor& ParamSet::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw Error("no parameter named '" + name + "'");
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> ParamSet::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void ParamSet::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw Error("snapshot does not match parameter set");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].tensor.mutable_values();
    if (dst.size() != values[i].size()) throw Error("snapshot size mismatch for '" + params_[i].name + "'");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

Tensor xavier_uniform(Shape shape, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(shape.rows + shape.cols));
  std::vector<double> v(shape.size());
  for (double& x : v) x = rng.uniform(-limit, limit);
  return Tensor::from(shape, std::move(v), true);
}

Tensor normal_init(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape.size());
  for (double& x : v) x = stddev * rng.normal();
  return Tensor::from(shape, std::move(v), true);
}

// --- Adam ----------------------------------------------------------------------

Adam::Adam(ParamSet& params, AdamConfig config) : params_(&params) {
  state_.config = config;
  for (const auto& p : params.params()) {
    state_.first_moment.emplace_back(p.tensor.size(), 0.0);
    state_.second_moment.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::set_state(AdamState s) {
  if (s.first_moment.size() != params_->size() || s.second_moment.size() != params_->size()) {
    throw Error("optimizer state does not match parameter set");
  }
  for (std::size_t i = 0; i < params_->size(); ++i) {
    const auto n = params_->params()[i].tensor.size();
    if (s.first_moment[i].size() != n || s.second_moment[i].size() != n) {
      throw Error("optimizer moment shape mismatch for '" + params_->params()[i].name + "'");
    }
  }
  state_ = std::move(s);
}

void Adam::step() {
  auto& st = state_;
  const auto& c = st.config;
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Tensor& p = params_->params()[i].tensor;
    const auto g = p.grad();  // untouched parameters see a zero gradient
    auto w = p.mutable_values();
    auto& m = st.first_moment[i];
    auto& v = st.second_moment[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double mhat = m[k] / bias1;
      const double vhat = v[k] / bias2;
      w[k] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

// --- checkpoint ----------------------------------------------------------------

Checkpoint Checkpoint::capture(const ParamSet& params, const AdamState* adam) {
  Checkpoint c;
  for (const auto& p : params.params()) {
    c.names.push_back(p.name);
    c.shapes.push_back(p.tensor.shape());
    c.values.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }
  if (adam) c.adam = *adam;
  return c;
}

void Checkpoint::apply(ParamSet& params) const {
  if (params.size() != names.size()) {
    throw FormatError("checkpoint has " + std::to_string(names.size()) + " parameters, model expects " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto& p = params.params()[i];
    if (p.name != names[i] || p.tensor.shape() != shapes[i]) {
      throw FormatError("checkpoint parameter '" + names[i] + "' " + shapes[i].str() + " does not match model's '" +
                        p.name + "' " + p.tensor.shape().str());
    }
  }
  std::vector<std::vector<double>> copy = values;
  params.restore(copy);
}

namespace {

constexpr char kMagic[8] = {'A', 'S', 'G', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(byte()); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    if (n > (1u << 24)) throw FormatError("checkpoint: implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw FormatError("checkpoint: truncated");
    return s;
  }

 private:
  unsigned char byte() {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("checkpoint: truncated");
    return static_cast<unsigned char>(c);
  }
  std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  Writer w(out);
  out.write(kMagic, sizeof(kMagic));
  w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.names.size()));
  for (std::size_t i = 0; i < ckpt.names.size(); ++i) {
    w.str(ckpt.names[i]);
    w.u32(2);
    w.u64(ckpt.shapes[i].rows);
    w.u64(ckpt.shapes[i].cols);
    for (double v : ckpt.values[i]) w.f64(v);
  }
  w.u8(ckpt.adam ? 1 : 0);
  if (ckpt.adam) {
    const auto& a = *ckpt.adam;
    w.u64(a.step);
    w.f64(a.config.learning_rate);
    w.f64(a.config.beta1);
    w.f64(a.config.beta2);
    w.f64(a.config.epsilon);
    for (std::size_t i = 0; i < ckpt.names.size(); ++i) {
      for (double v : a.first_moment.at(i)) w.f64(v);
      for (double v : a.second_moment.at(i)) w.f64(v);
    }
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw FormatError("checkpoint: bad magic");
  Reader r(in);
  Checkpoint c;
  const auto n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    c.metadata[k] = r.str();
  }
  const auto n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    c.names.push_back(r.str());
    if (r.u32() != 2) throw FormatError("checkpoint: only rank-2 tensors are supported");
    Shape s;
    s.rows = r.u64();
    s.cols = r.u64();
    if (s.rows * s.cols > (std::size_t{1} << 32)) throw FormatError("checkpoint: implausible tensor size");
    c.shapes.push_back(s);
    std::vector<double> v(s.size());
    for (double& x : v) x = r.f64();
    c.values.push_back(std::move(v));
  }
  if (r.u8()) {
    AdamState a;
    a.step = r.u64();
    a.config.learning_rate = r.f64();
    a.config.beta1 = r.f64();
    a.config.beta2 = r.f64();
    a.config.epsilon = r.f64();
    for (std::size_t i = 0; i < c.names.size(); ++i) {
      std::vector<double> m(c.shapes[i].size());
      std::vector<double> v(c.shapes[i].size());
      for (double& x : m) x = r.f64();
      for (double& x : v) x = r.f64();
      a.first_moment.push_back(std::move(m));
      a.second_moment.push_back(std::move(v));
    }
    c.adam = std::move(a);
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace asgnet
