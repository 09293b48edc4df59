#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "locagent/features.hpp"
#include "locagent/geometry.hpp"
#include "locagent/rng.hpp"

namespace locagent {

using ActionValues = std::array<double, kNumActions>;

struct SgdConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int minibatch = 64;
  double dropout = 0.5;
};

void validate(const SgdConfig& cfg);
nlohmann::json to_json(const SgdConfig& cfg);
SgdConfig sgd_config_from_json(const nlohmann::json& j);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

enum class Mode : std::uint8_t { kTrain, kEval };

// Activations kept by a train-mode forward pass. Columns are batch items.
struct ForwardCache {
  std::uint64_t params_version = 0;
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre_activations;  // one per hidden layer
  std::vector<Eigen::MatrixXd> masks;            // inverted-dropout masks, one per hidden layer
  std::vector<Eigen::MatrixXd> activations;      // post-relu, post-dropout
  Eigen::MatrixXd output;                        // 9 x batch
};

// Fully connected action-value network: input -> relu hidden layers -> 9
// linear outputs, inverted dropout on every hidden layer in train mode.
class QNetwork {
 public:
  QNetwork(int input_dim, std::vector<int> hidden_sizes, double dropout);

  // Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  static QNetwork initialized(int input_dim, std::vector<int> hidden_sizes, double dropout, Rng& rng);

  int input_dim() const { return input_dim_; }
  const std::vector<int>& hidden_sizes() const { return hidden_sizes_; }
  double dropout() const { return dropout_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  // Incremented by every parameter update; used to detect stale caches.
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  // Deterministic inference.
  ActionValues evaluate(std::span<const double> state) const;
  Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& inputs) const;

  // Samples fresh dropout masks and records everything backward() needs.
  Eigen::MatrixXd forward_train(const Eigen::MatrixXd& inputs, Rng& rng, ForwardCache& cache) const;
  // Replays a train-mode pass with fixed masks (finite-difference checks).
  Eigen::MatrixXd forward_with_masks(const Eigen::MatrixXd& inputs, const std::vector<Eigen::MatrixXd>& masks,
                                     ForwardCache& cache) const;

  bool all_finite() const;

 private:
  int input_dim_;
  std::vector<int> hidden_sizes_;
  double dropout_;
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

// Single-state forward; fills `cache` in train mode.
ActionValues forward(const QNetwork& net, std::span<const double> state, Mode mode, Rng& rng,
                     ForwardCache* cache = nullptr);

// Index of the largest value, lowest ordinal on ties.
int argmax_action(std::span<const double> values);

struct Gradients {
  std::vector<DenseLayer> layers;
  double loss = 0.0;  // mean of 0.5 * (y - Q(s,a))^2 over the batch
};

Gradients zero_gradients(const QNetwork& net);

// Gradient of mean_i 0.5 * (y_i - Q(s_i, a_i))^2. Only the selected output
// unit of each column receives error. Throws ContractError if the cache was
// produced before the latest parameter update.
Gradients backward(const QNetwork& net, const ForwardCache& cache, std::span<const int> actions,
                   std::span<const double> targets);

// Momentum SGD: v <- mu * v - lr * g; w <- w + v.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(const QNetwork& net);
  void step(QNetwork& net, const Gradients& grads, const SgdConfig& cfg);
  const std::vector<DenseLayer>& velocity() const { return velocity_; }

 private:
  std::vector<DenseLayer> velocity_;
};

struct Checkpoint {
  QNetwork network;
  FeatureExtractorSpec extractor;
  int observation_dim = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> save_checkpoint(const QNetwork& net, const FeatureExtractorSpec& extractor,
                                          int observation_dim);

// Throws ValidationError on bad magic, version, truncation, checksum or, when
// expected_input_dim >= 0, a dimension mismatch.
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes, int expected_input_dim = -1);

}  // namespace locagent
