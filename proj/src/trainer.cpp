#include "locagent/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "locagent/errors.hpp"

namespace locagent {
namespace {

Eigen::MatrixXd stack_states(const std::vector<const StateVector*>& states, int input_dim) {
  Eigen::MatrixXd x(input_dim, static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(states[i]->values.data(), static_cast<Eigen::Index>(input_dim));
  }
  return x;
}

// One minibatch Q-learning update; returns the batch loss.
double update_once(QNetwork& net, SgdOptimizer& optimizer, const ReplayMemory& replay, const TrainConfig& cfg,
                   Rng& sample_rng, Rng& dropout_rng) {
  const auto batch = replay.sample(static_cast<std::size_t>(cfg.sgd.minibatch), sample_rng);
  std::vector<const StateVector*> states;
  std::vector<const StateVector*> next_states;
  std::vector<std::size_t> bootstrap;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    states.push_back(batch[i]->state.get());
    if (!batch[i]->terminal) {
      next_states.push_back(batch[i]->next_state.get());
      bootstrap.push_back(i);
    }
  }

  std::vector<double> targets(batch.size());
  std::vector<int> actions(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    targets[i] = batch[i]->reward;
    actions[i] = to_index(batch[i]->action);
  }
  if (!next_states.empty()) {
    const Eigen::MatrixXd next_q = net.evaluate_batch(stack_states(next_states, net.input_dim()));
    for (std::size_t k = 0; k < bootstrap.size(); ++k) {
      targets[bootstrap[k]] += cfg.gamma * next_q.col(static_cast<Eigen::Index>(k)).maxCoeff();
    }
  }

  ForwardCache cache;
  net.forward_train(stack_states(states, net.input_dim()), dropout_rng, cache);
  const Gradients grads = backward(net, cache, actions, targets);
  if (!std::isfinite(grads.loss)) {
    throw RuntimeFailure("training diverged: non-finite loss after " + std::to_string(net.version()) + " updates");
  }
  optimizer.step(net, grads, cfg.sgd);
  if (!net.all_finite()) {
    throw RuntimeFailure("training diverged: non-finite parameters after " + std::to_string(net.version()) +
                         " updates");
  }
  return grads.loss;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.epochs <= 0) throw ValidationError("train.epochs must be positive");
  if (cfg.anneal_epochs <= 0) throw ValidationError("train.anneal_epochs must be positive");
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(cfg.epsilon_start) || !unit(cfg.epsilon_end)) throw ValidationError("train.epsilon_* must be in [0,1]");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ValidationError("train.gamma must be in (0,1)");
  if (cfg.max_training_steps_per_object <= 0) {
    throw ValidationError("train.max_training_steps_per_object must be positive");
  }
  if (cfg.replay_capacity == 0) throw ValidationError("train.replay_capacity must be positive");
  if (cfg.hidden_sizes.empty()) throw ValidationError("train.hidden_sizes must not be empty");
  for (int h : cfg.hidden_sizes) {
    if (h <= 0) throw ValidationError("train.hidden_sizes entries must be positive");
  }
  validate(cfg.env);
  validate(cfg.sgd);
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {
      {"epochs", cfg.epochs},
      {"epsilon_start", cfg.epsilon_start},
      {"epsilon_end", cfg.epsilon_end},
      {"anneal_epochs", cfg.anneal_epochs},
      {"gamma", cfg.gamma},
      {"max_training_steps_per_object", cfg.max_training_steps_per_object},
      {"replay_capacity", cfg.replay_capacity},
      {"hidden_sizes", cfg.hidden_sizes},
      {"seed", cfg.seed},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.epsilon_start = j.value("epsilon_start", cfg.epsilon_start);
    cfg.epsilon_end = j.value("epsilon_end", cfg.epsilon_end);
    cfg.anneal_epochs = j.value("anneal_epochs", cfg.anneal_epochs);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.max_training_steps_per_object = j.value("max_training_steps_per_object", cfg.max_training_steps_per_object);
    cfg.replay_capacity = j.value("replay_capacity", cfg.replay_capacity);
    cfg.hidden_sizes = j.value("hidden_sizes", cfg.hidden_sizes);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("train: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

nlohmann::json to_json(const EpochLog& log) {
  return {
      {"epoch", log.epoch},
      {"epsilon", log.epsilon},
      {"mean_reward", log.mean_reward},
      {"mean_loss", log.mean_loss},
      {"trigger_tp", log.trigger_tp},
      {"trigger_fp", log.trigger_fp},
      {"steps", log.steps},
      {"updates", log.updates},
      {"replay_size", log.replay_size},
  };
}

double epsilon_for_epoch(int epoch, const TrainConfig& cfg) {
  if (epoch < 1) throw ContractError("epsilon_for_epoch: epochs are numbered from 1");
  if (epoch >= cfg.anneal_epochs || cfg.anneal_epochs == 1) return cfg.epsilon_end;
  const double t = static_cast<double>(epoch - 1) / static_cast<double>(cfg.anneal_epochs - 1);
  return std::clamp(cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * t, 0.0, 1.0);
}

Action choose_training_action(const StateVector& state, const Environment& env, const QNetwork& net, double epsilon,
                              Rng& rng) {
  if (rng.uniform() < epsilon) {
    std::vector<Action> candidates;
    if (const auto t = env.target()) {
      candidates = positive_actions(env.current_box(), env.scene().truths[*t], env.config().alpha, env.config().tau,
                                    env.frame());
    }
    if (candidates.empty()) return action_from_index(static_cast<int>(rng.below(kNumActions)));
    return candidates[rng.below(candidates.size())];
  }
  const ActionValues q = net.evaluate(state.values);
  return action_from_index(argmax_action(q));
}

double q_target(const Transition& t, const QNetwork& net, double gamma) {
  if (t.terminal) return t.reward;
  const ActionValues q = net.evaluate(t.next_state->values);
  return t.reward + gamma * *std::max_element(q.begin(), q.end());
}

TrainResult train(const std::vector<Scene>& dataset, const FeatureExtractorSpec& extractor_spec, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  validate(cfg);
  if (dataset.empty()) throw ValidationError("train: dataset is empty");
  const int channels = dataset.front().image.channels;
  for (const Scene& s : dataset) {
    validate_scene(s);
    if (s.image.channels != channels) throw ValidationError("train: scenes disagree on channel count");
    if (s.category != dataset.front().category) throw ValidationError("train: scenes mix categories");
  }

  const FeatureExtractor extractor(extractor_spec, channels);
  const int obs_dim = extractor.output_dim();
  Rng init_rng(derive_seed(cfg.seed, "qnet-init"));
  QNetwork net = QNetwork::initialized(obs_dim + kHistoryDim, cfg.hidden_sizes, cfg.sgd.dropout, init_rng);
  SgdOptimizer optimizer(net);
  ReplayMemory replay(cfg.replay_capacity);
  Rng order_rng(derive_seed(cfg.seed, "scene-order"));
  Rng explore_rng(derive_seed(cfg.seed, "exploration"));
  Rng sample_rng(derive_seed(cfg.seed, "replay-sample"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

  EnvConfig env_cfg = cfg.env;
  env_cfg.restart_after = cfg.max_training_steps_per_object;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{net, obs_dim, {}};
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.epsilon = epsilon_for_epoch(epoch, cfg);
    double reward_sum = 0.0;
    double loss_sum = 0.0;

    // Fisher-Yates with our own RNG so the order is platform independent.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);

    for (std::size_t idx : order) {
      Environment env(dataset[idx], env_cfg);
      for (std::size_t truth = 0; truth < dataset[idx].truths.size(); ++truth) {
        if (env.state().matched_truths[truth] || env.done() || env.all_matched()) continue;
        env.restart(0);
        HistoryVector history;
        auto state = std::make_shared<const StateVector>(
            observe(extractor, env.scene().image, env.current_box(), history));
        for (int k = 0; k < cfg.max_training_steps_per_object && !env.done(); ++k) {
          const Action a = choose_training_action(*state, env, net, log.epsilon, explore_rng);
          const StepResult step = env.step(a);
          if (hooks.on_step) hooks.on_step(dataset[idx], step);
          history = push_history(history, a);

          std::shared_ptr<const StateVector> next;
          if (!step.triggered) {
            next = std::make_shared<const StateVector>(observe(extractor, env.scene().image, step.next_box, history));
          }
          Transition t = make_transition(state, a, step.reward.value, next);
          if (hooks.on_transition) hooks.on_transition(t);
          replay.push(std::move(t));

          reward_sum += step.reward.value;
          ++log.steps;
          if (step.triggered) {
            if (step.reward.value > 0.0) {
              ++log.trigger_tp;
            } else {
              ++log.trigger_fp;
            }
          }
          if (replay.size() >= static_cast<std::size_t>(cfg.sgd.minibatch)) {
            loss_sum += update_once(net, optimizer, replay, cfg, sample_rng, dropout_rng);
            ++log.updates;
          }
          if (step.restart) break;
          state = std::move(next);
        }
      }
    }

    log.mean_reward = log.steps ? reward_sum / static_cast<double>(log.steps) : 0.0;
    log.mean_loss = log.updates ? loss_sum / static_cast<double>(log.updates) : 0.0;
    log.replay_size = replay.size();
    result.log.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
    if (hooks.on_snapshot) hooks.on_snapshot(epoch, net);
  }
  result.network = std::move(net);
  return result;
}

}  // namespace locagent
