#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ssmail::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

/// Storage behind a Tensor handle. Grads are allocated lazily.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  /// Id of the tape record that produced this value; -1 for leaves.
  std::int64_t creator = -1;
  Tape* tape = nullptr;

  std::span<double> grad_buffer();
};

/// Shared handle to a dense row-major float64 array.
///
/// Copies of a Tensor alias the same storage. Parameters are leaves with
/// requires_grad set; every op result recorded on an active Tape is a
/// non-leaf whose gradient is filled by Tape::backward.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// 2-D tensor from nested rows; all rows must have equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  /// Mutable access; only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_data() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->grad_buffer(); }
  void zero_grad();

  bool is_leaf() const { return impl_->creator < 0; }
  std::int64_t creator() const { return impl_->creator; }

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  /// Value copy cut from any computation record.
  Tensor detach() const;
  /// Deep copy preserving requires_grad; grads are not copied.
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared_impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend class Tape;
  friend Tensor make_tensor(Shape, std::vector<double>);

  std::shared_ptr<TensorImpl> impl_;
};

Tensor make_tensor(Shape shape, std::vector<double> data);

}  // namespace ssmail::ad
