#include "ssmail/trainer/replay_buffer.hpp"

#include <algorithm>

#include "ssmail/common/error.hpp"

namespace ssmail::trainer {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("ReplayBuffer: capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

std::size_t ReplayBuffer::count(Source s) const {
  return static_cast<std::size_t>(
      std::count_if(items_.begin(), items_.end(), [&](const Transition& t) { return t.source == s; }));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw Error("ReplayBuffer: sample from empty buffer");
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &items_[rng.index(items_.size())];
  return out;
}

}  // namespace ssmail::trainer
