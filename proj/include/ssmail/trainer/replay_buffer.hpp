#pragma once

#include <cstddef>
#include <vector>

#include "ssmail/common/rng.hpp"

namespace ssmail::trainer {

enum class Source { generated, interpolated };

/// One joint step. States are normalized and unclamped, actions raw. The
/// encoder memory before the step is kept so the edge distribution at s can
/// be recomputed with current weights. No reward is stored.
struct Transition {
  std::vector<double> x;       // [N*ds]
  std::vector<double> action;  // [N*da]
  std::vector<double> x_next;  // [N*ds]
  std::vector<float> enc_h;    // [E*hidden]
  std::vector<float> enc_c;
  bool done = false;
  Source source = Source::generated;
  double alpha = 0.0;  // interpolated only
};

/// Fixed-capacity FIFO ring.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  std::size_t count(Source s) const;

  void push(Transition t);
  /// Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;
  const Transition& at(std::size_t i) const { return items_.at(i); }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest slot once full
  std::vector<Transition> items_;
};

}  // namespace ssmail::trainer
