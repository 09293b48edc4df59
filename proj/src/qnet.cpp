#include "locagent/qnet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "locagent/errors.hpp"

namespace locagent {
namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'L', 'O', 'C', 'Q', 'N', 'E', 'T', '1'};

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ValidationError("checkpoint: truncated data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t checksum(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

}  // namespace

void validate(const SgdConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ValidationError("sgd.learning_rate must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ValidationError("sgd.momentum must be in [0,1)");
  if (cfg.minibatch <= 0) throw ValidationError("sgd.minibatch must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ValidationError("sgd.dropout must be in [0,1)");
}

nlohmann::json to_json(const SgdConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"momentum", cfg.momentum},
          {"minibatch", cfg.minibatch},
          {"dropout", cfg.dropout}};
}

SgdConfig sgd_config_from_json(const nlohmann::json& j) {
  SgdConfig cfg;
  try {
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.minibatch = j.value("minibatch", cfg.minibatch);
    cfg.dropout = j.value("dropout", cfg.dropout);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("sgd: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

QNetwork::QNetwork(int input_dim, std::vector<int> hidden_sizes, double dropout)
    : input_dim_(input_dim), hidden_sizes_(std::move(hidden_sizes)), dropout_(dropout) {
  if (input_dim_ <= 0) throw ContractError("QNetwork: input_dim must be positive");
  if (!(dropout_ >= 0.0 && dropout_ < 1.0)) throw ContractError("QNetwork: dropout must be in [0,1)");
  int fan_in = input_dim_;
  for (int h : hidden_sizes_) {
    if (h <= 0) throw ContractError("QNetwork: hidden sizes must be positive");
    layers_.push_back({Eigen::MatrixXd::Zero(h, fan_in), Eigen::VectorXd::Zero(h)});
    fan_in = h;
  }
  layers_.push_back({Eigen::MatrixXd::Zero(kNumActions, fan_in), Eigen::VectorXd::Zero(kNumActions)});
}

QNetwork QNetwork::initialized(int input_dim, std::vector<int> hidden_sizes, double dropout, Rng& rng) {
  QNetwork net(input_dim, std::move(hidden_sizes), dropout);
  for (DenseLayer& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    // Row-major fill so the draw order matches the checkpoint layout.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
    }
  }
  return net;
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::MatrixXd QNetwork::evaluate_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim_) throw ContractError("QNetwork: input dimension mismatch");
  Eigen::MatrixXd x = inputs;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    x = relu((layers_[l].weight * x).colwise() + layers_[l].bias);
  }
  const DenseLayer& out = layers_.back();
  return (out.weight * x).colwise() + out.bias;
}

ActionValues QNetwork::evaluate(std::span<const double> state) const {
  if (static_cast<int>(state.size()) != input_dim_) throw ContractError("QNetwork: input dimension mismatch");
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(state.data(), static_cast<Eigen::Index>(state.size()));
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    x = (layers_[l].weight * x + layers_[l].bias).cwiseMax(0.0);
  }
  const Eigen::VectorXd q = layers_.back().weight * x + layers_.back().bias;
  ActionValues out{};
  for (int a = 0; a < kNumActions; ++a) out[static_cast<std::size_t>(a)] = q(a);
  return out;
}

Eigen::MatrixXd QNetwork::forward_train(const Eigen::MatrixXd& inputs, Rng& rng, ForwardCache& cache) const {
  std::vector<Eigen::MatrixXd> masks;
  const double keep = 1.0 - dropout_;
  for (int h : hidden_sizes_) {
    Eigen::MatrixXd m(h, inputs.cols());
    // Column-by-column so the draw order is independent of Eigen's storage.
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }
    masks.push_back(std::move(m));
  }
  return forward_with_masks(inputs, masks, cache);
}

Eigen::MatrixXd QNetwork::forward_with_masks(const Eigen::MatrixXd& inputs, const std::vector<Eigen::MatrixXd>& masks,
                                             ForwardCache& cache) const {
  if (inputs.rows() != input_dim_) throw ContractError("QNetwork: input dimension mismatch");
  if (masks.size() != hidden_sizes_.size()) throw ContractError("QNetwork: wrong number of dropout masks");
  cache.params_version = version_;
  cache.input = inputs;
  cache.pre_activations.clear();
  cache.activations.clear();
  cache.masks = masks;
  const Eigen::MatrixXd* x = &cache.input;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    cache.pre_activations.push_back((layers_[l].weight * *x).colwise() + layers_[l].bias);
    cache.activations.push_back(relu(cache.pre_activations.back()).cwiseProduct(masks[l]));
    x = &cache.activations.back();
  }
  cache.output = (layers_.back().weight * *x).colwise() + layers_.back().bias;
  return cache.output;
}

bool QNetwork::all_finite() const {
  for (const DenseLayer& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

ActionValues forward(const QNetwork& net, std::span<const double> state, Mode mode, Rng& rng, ForwardCache* cache) {
  if (mode == Mode::kEval) return net.evaluate(state);
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const Eigen::MatrixXd in =
      Eigen::Map<const Eigen::MatrixXd>(state.data(), static_cast<Eigen::Index>(state.size()), 1);
  const Eigen::MatrixXd q = net.forward_train(in, rng, c);
  ActionValues out{};
  for (int a = 0; a < kNumActions; ++a) out[static_cast<std::size_t>(a)] = q(a, 0);
  return out;
}

int argmax_action(std::span<const double> values) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(values.size()); ++a) {
    if (values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(best)]) best = a;
  }
  return best;
}

Gradients zero_gradients(const QNetwork& net) {
  Gradients g;
  for (const DenseLayer& l : net.layers()) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

Gradients backward(const QNetwork& net, const ForwardCache& cache, std::span<const int> actions,
                   std::span<const double> targets) {
  if (cache.params_version != net.version() || cache.output.cols() == 0) {
    throw ContractError("backward: stale or empty forward cache");
  }
  const Eigen::Index batch = cache.output.cols();
  if (static_cast<Eigen::Index>(actions.size()) != batch || static_cast<Eigen::Index>(targets.size()) != batch) {
    throw ContractError("backward: actions/targets do not match the cached batch");
  }

  const auto& layers = net.layers();
  Gradients g;
  g.layers.resize(layers.size());

  // dL/dQ: nonzero only at the selected action of each column.
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(kNumActions, batch);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= kNumActions) throw ContractError("backward: action index out of range");
    const double residual = cache.output(a, i) - targets[static_cast<std::size_t>(i)];
    loss += 0.5 * residual * residual;
    delta(a, i) = residual / static_cast<double>(batch);
  }
  g.loss = loss / static_cast<double>(batch);

  for (std::size_t l = layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.activations[l - 1];
    g.layers[l].weight = delta * below.transpose();
    g.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd up = layers[l].weight.transpose() * delta;
    const Eigen::MatrixXd& pre = cache.pre_activations[l - 1];
    delta = up.cwiseProduct(cache.masks[l - 1]).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  }
  return g;
}

SgdOptimizer::SgdOptimizer(const QNetwork& net) : velocity_(zero_gradients(net).layers) {}

void SgdOptimizer::step(QNetwork& net, const Gradients& grads, const SgdConfig& cfg) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size()) throw ContractError("sgd_step: gradient shape mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (grads.layers[l].weight.rows() != layers[l].weight.rows() ||
        grads.layers[l].weight.cols() != layers[l].weight.cols() ||
        grads.layers[l].bias.size() != layers[l].bias.size()) {
      throw ContractError("sgd_step: gradient shape mismatch");
    }
    velocity_[l].weight = cfg.momentum * velocity_[l].weight - cfg.learning_rate * grads.layers[l].weight;
    velocity_[l].bias = cfg.momentum * velocity_[l].bias - cfg.learning_rate * grads.layers[l].bias;
    layers[l].weight += velocity_[l].weight;
    layers[l].bias += velocity_[l].bias;
  }
  net.touch();
}

std::vector<std::uint8_t> save_checkpoint(const QNetwork& net, const FeatureExtractorSpec& extractor,
                                          int observation_dim) {
  if (observation_dim + kHistoryDim != net.input_dim()) {
    throw ContractError("save_checkpoint: observation dim + history does not match the network input");
  }
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(kActionOrderingVersion);
  w.u32(static_cast<std::uint32_t>(kNumActions));
  w.u32(static_cast<std::uint32_t>(net.input_dim()));
  w.u32(static_cast<std::uint32_t>(observation_dim));
  w.f64(net.dropout());
  const std::string spec = to_json(extractor).dump();
  w.u32(static_cast<std::uint32_t>(spec.size()));
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(spec.data()), spec.size()));
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const DenseLayer& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.weight.rows()));
    w.u32(static_cast<std::uint32_t>(l.weight.cols()));
  }
  for (const DenseLayer& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f64(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f64(l.bias(r));
  }
  w.u64(checksum(w.bytes()));
  return std::move(w.bytes());
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes, int expected_input_dim) {
  ByteReader r(bytes);
  const auto magic = r.raw(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw ValidationError("checkpoint: bad magic");
  if (const auto v = r.u32(); v != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(v));
  }
  if (const auto v = r.u32(); v != kActionOrderingVersion) {
    throw ValidationError("checkpoint: action ordering version " + std::to_string(v) + " is not supported");
  }
  if (r.u32() != static_cast<std::uint32_t>(kNumActions)) throw ValidationError("checkpoint: wrong action count");
  const auto input_dim = static_cast<int>(r.u32());
  const auto observation_dim = static_cast<int>(r.u32());
  const double dropout = r.f64();
  const auto spec_len = r.u32();
  const auto spec_bytes = r.raw(spec_len);
  FeatureExtractorSpec extractor;
  try {
    extractor = extractor_spec_from_json(nlohmann::json::parse(spec_bytes.begin(), spec_bytes.end()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad extractor spec: ") + e.what());
  }
  if (observation_dim + kHistoryDim != input_dim) throw ValidationError("checkpoint: inconsistent dimensions");
  if (expected_input_dim >= 0 && input_dim != expected_input_dim) {
    throw ValidationError("checkpoint: input dimension " + std::to_string(input_dim) + " does not match expected " +
                          std::to_string(expected_input_dim));
  }

  const auto num_layers = r.u32();
  if (num_layers == 0 || num_layers > 64) throw ValidationError("checkpoint: bad layer count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t i = 0; i < num_layers; ++i) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    shapes.emplace_back(rows, cols);
  }
  std::vector<int> hidden;
  int fan_in = input_dim;
  for (std::uint32_t i = 0; i < num_layers; ++i) {
    const auto [rows, cols] = shapes[i];
    if (static_cast<int>(cols) != fan_in) throw ValidationError("checkpoint: layer shapes do not chain");
    if (i + 1 < num_layers) hidden.push_back(static_cast<int>(rows));
    fan_in = static_cast<int>(rows);
  }
  if (fan_in != kNumActions) throw ValidationError("checkpoint: output layer must have 9 units");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("checkpoint: bad dropout rate");

  QNetwork net(input_dim, hidden, dropout);
  for (DenseLayer& l : net.layers()) {
    for (Eigen::Index row = 0; row < l.weight.rows(); ++row) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(row, c) = r.f64();
    }
    for (Eigen::Index row = 0; row < l.bias.size(); ++row) l.bias(row) = r.f64();
  }
  const std::size_t body = r.position();
  if (r.u64() != checksum(bytes.first(body))) throw ValidationError("checkpoint: checksum mismatch");
  if (r.remaining() != 0) throw ValidationError("checkpoint: trailing bytes");
  if (!net.all_finite()) throw ValidationError("checkpoint: non-finite parameters");
  return {std::move(net), extractor, observation_dim};
}

}  // namespace locagent
