#include "sacd/replay.hpp"

#include <stdexcept>

namespace sacd {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  storage_.reserve(capacity_);
}

void ReplayBuffer::push(Transition t) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
    return;
  }
  storage_[cursor_] = std::move(t);  // evict the oldest element
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0) throw std::invalid_argument("ReplayBuffer::sample: batch size must be positive");
  if (storage_.size() < batch_size) {
    throw std::runtime_error("ReplayBuffer::sample: not enough experience (have " +
                             std::to_string(storage_.size()) + ", need " + std::to_string(batch_size) + ")");
  }
  std::vector<Transition> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out.push_back(storage_[draw_index(rng, storage_.size())]);
  return out;
}

const Transition& ReplayBuffer::at_oldest(std::size_t i) const {
  if (i >= storage_.size()) throw std::out_of_range("ReplayBuffer::at_oldest: index out of range");
  if (storage_.size() < capacity_) return storage_[i];
  return storage_[(cursor_ + i) % capacity_];
}

ReplayBuffer ReplayBuffer::restore(std::size_t capacity, std::vector<Transition> storage, std::size_t cursor) {
  if (storage.size() > capacity) throw std::invalid_argument("ReplayBuffer::restore: storage exceeds capacity");
  if (cursor >= capacity) throw std::invalid_argument("ReplayBuffer::restore: cursor out of range");
  ReplayBuffer buf(capacity);
  buf.storage_ = std::move(storage);
  buf.cursor_ = cursor;
  return buf;
}

}  // namespace sacd
