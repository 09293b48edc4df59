#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "locagent/features.hpp"
#include "locagent/geometry.hpp"
#include "locagent/rng.hpp"

namespace locagent {

// States are shared and immutable: consecutive transitions reference the
// same StateVector, and nothing is mutated once stored.
struct Transition {
  std::shared_ptr<const StateVector> state;
  Action action = Action::kTrigger;
  double reward = 0.0;
  std::shared_ptr<const StateVector> next_state;  // unused when terminal
  bool terminal = true;
};

// Builds a transition with terminal set from the action. Throws
// ContractError on a missing state or a missing next state for a transform.
Transition make_transition(std::shared_ptr<const StateVector> state, Action action, double reward,
                           std::shared_ptr<const StateVector> next_state);

// Fixed-capacity FIFO ring with uniform sampling with replacement.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition t);

  // k independent uniform draws with replacement. Throws ContractError when
  // the memory is empty.
  std::vector<const Transition*> sample(std::size_t k, Rng& rng) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return items_.size() == capacity_; }

  // i-th oldest entry.
  const Transition& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // index of the oldest entry once full
};

}  // namespace locagent
