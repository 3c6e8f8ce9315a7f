#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "ssmail/autodiff/tensor.hpp"

namespace ssmail::ad {

/// Computation record for one forward pass.
///
/// Constructing a Tape makes it the active recorder for the current thread
/// until it is destroyed; ops executed while no tape is active (or under a
/// NoGradGuard) are evaluated without recording. Records are appended in
/// execution order, so ids increase strictly and the record is topologically
/// sorted by construction. A tape is confined to the thread that created it.
class Tape {
 public:
  struct Record {
    const char* op;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    std::function<void()> backward;
  };

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return records_.size(); }
  const Record& record(std::size_t id) const { return records_.at(id); }

  /// Reverse sweep from a scalar loss. Leaf grads accumulate across calls;
  /// intermediate grads are reset at the start of every sweep.
  void backward(const Tensor& loss);

  /// Innermost recorder on this thread, or nullptr when recording is off.
  static Tape* active();

  /// Appends a record; used by op implementations.
  void push(const char* op, std::vector<std::shared_ptr<TensorImpl>> inputs,
            const Tensor& output, std::function<void()> backward);

 private:
  std::vector<Record> records_;
};

/// Disables recording for its lifetime on the current thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Convenience: sweep on the tape that produced `loss`.
void backward(const Tensor& loss);

}  // namespace ssmail::ad
