#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"

#include "locagent/environment.hpp"
#include "locagent/features.hpp"
#include "locagent/qnet.hpp"
#include "locagent/replay.hpp"

namespace locagent {

struct TrainConfig {
  int epochs = 15;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  int anneal_epochs = 5;
  double gamma = 0.9;
  EnvConfig env;  // alpha, tau, eta and the rest of the episode mechanics
  int max_training_steps_per_object = 40;
  std::size_t replay_capacity = 10000;
  SgdConfig sgd;
  std::vector<int> hidden_sizes = {64, 64};
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
// Reads the keys present in j on top of the defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochLog {
  int epoch = 0;
  double epsilon = 0.0;
  double mean_reward = 0.0;
  double mean_loss = 0.0;
  int trigger_tp = 0;
  int trigger_fp = 0;
  std::size_t steps = 0;
  std::size_t updates = 0;
  std::size_t replay_size = 0;
};

nlohmann::json to_json(const EpochLog& log);

// Linear from epsilon_start at epoch 1 to epsilon_end at anneal_epochs, then flat.
double epsilon_for_epoch(int epoch, const TrainConfig& cfg);

// Guided epsilon-greedy: with probability epsilon a uniform draw from the
// IoU-improving actions (any action when there are none), otherwise the
// greedy action of the network.
Action choose_training_action(const StateVector& state, const Environment& env, const QNetwork& net, double epsilon,
                              Rng& rng);

// r for terminal transitions, r + gamma * max_a' Q(s', a') otherwise.
double q_target(const Transition& t, const QNetwork& net, double gamma);

struct TrainResult {
  QNetwork network;
  int observation_dim = 0;
  std::vector<EpochLog> log;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  // Every environment step, e.g. for JSON-lines traces.
  std::function<void(const Scene&, const StepResult&)> on_step;
  // Every stored transition (tests inspect the replay stream through this).
  std::function<void(const Transition&)> on_transition;
  // Network state at the end of each epoch.
  std::function<void(int epoch, const QNetwork&)> on_snapshot;
};

// Runs the full training procedure. Throws ValidationError for an empty or
// inconsistent dataset and RuntimeFailure when the loss diverges.
TrainResult train(const std::vector<Scene>& dataset, const FeatureExtractorSpec& extractor, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace locagent
