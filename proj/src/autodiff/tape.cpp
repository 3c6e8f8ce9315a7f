#include "ssmail/autodiff/tape.hpp"

#include "ssmail/common/error.hpp"

namespace ssmail::ad {

namespace {
thread_local std::vector<Tape*> recorder_stack;
}

Tape::Tape() { recorder_stack.push_back(this); }

Tape::~Tape() {
  // Outputs that outlive the record become plain constants.
  for (auto& r : records_) {
    r.output->creator = -1;
    r.output->tape = nullptr;
    r.output->requires_grad = false;
  }
  // Tapes and guards are scoped, so the top entry is ours.
  if (!recorder_stack.empty() && recorder_stack.back() == this) recorder_stack.pop_back();
}

Tape* Tape::active() { return recorder_stack.empty() ? nullptr : recorder_stack.back(); }

void Tape::push(const char* op, std::vector<std::shared_ptr<TensorImpl>> inputs, const Tensor& output,
                std::function<void()> backward) {
  auto* impl = output.impl();
  impl->creator = static_cast<std::int64_t>(records_.size());
  impl->tape = this;
  impl->requires_grad = true;
  records_.push_back(Record{op, std::move(inputs), output.shared_impl(), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw Error("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  auto* root = loss.impl();
  if (root->creator < 0) {
    if (root->requires_grad) root->grad_buffer()[0] += 1.0;
    return;
  }
  if (root->tape != this) throw Error("backward: loss was not recorded on this tape");

  const auto last = static_cast<std::size_t>(root->creator);
  for (std::size_t i = 0; i <= last; ++i) records_[i].output->grad.clear();
  root->grad_buffer()[0] = 1.0;
  for (std::size_t i = last + 1; i-- > 0;) {
    if (!records_[i].output->grad.empty()) records_[i].backward();
  }
}

NoGradGuard::NoGradGuard() { recorder_stack.push_back(nullptr); }

NoGradGuard::~NoGradGuard() {
  if (!recorder_stack.empty() && recorder_stack.back() == nullptr) recorder_stack.pop_back();
}

void backward(const Tensor& loss) {
  auto* impl = loss.impl();
  if (impl->creator < 0) {
    if (loss.numel() != 1) throw Error("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    if (impl->requires_grad) impl->grad_buffer()[0] += 1.0;
    return;
  }
  impl->tape->backward(loss);
}

}  // namespace ssmail::ad
