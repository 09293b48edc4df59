#include "locagent/replay.hpp"

#include "locagent/errors.hpp"

namespace locagent {

Transition make_transition(std::shared_ptr<const StateVector> state, Action action, double reward,
                           std::shared_ptr<const StateVector> next_state) {
  const bool terminal = action == Action::kTrigger;
  if (!state) throw ContractError("make_transition: missing state");
  if (!terminal && !next_state) throw ContractError("make_transition: transform needs a next state");
  return {std::move(state), action, reward, std::move(next_state), terminal};
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ContractError("ReplayMemory: capacity must be positive");
  items_.reserve(capacity_);
}

void ReplayMemory::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t k, Rng& rng) const {
  if (items_.empty()) throw ContractError("ReplayMemory::sample: memory is empty");
  std::vector<const Transition*> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(&items_[rng.below(items_.size())]);
  return out;
}

}  // namespace locagent
