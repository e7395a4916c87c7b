#pragma once

#include <cstddef>
#include <vector>

#include "sacd/rng.hpp"

namespace sacd {

// One experience record. `done` is true only for true terminals;
// truncated episodes keep bootstrapping.
struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

// Fixed-capacity FIFO ring with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return storage_.size(); }

  void push(Transition t);
  std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const;

  // Oldest-first view of the stored transitions.
  const Transition& at_oldest(std::size_t i) const;

  // Physical ring state, for callers that snapshot and rebuild a run.
  const std::vector<Transition>& storage() const { return storage_; }
  std::size_t cursor() const { return cursor_; }
  static ReplayBuffer restore(std::size_t capacity, std::vector<Transition> storage, std::size_t cursor);

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;  // next write slot once full
};

}  // namespace sacd
