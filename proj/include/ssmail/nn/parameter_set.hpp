#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssmail/autodiff/tensor.hpp"

namespace ssmail::nn {

/// Ordered, name-unique collection of trainable tensors for one network.
/// Iteration follows insertion order.
class ParameterSet {
 public:
  using Entry = std::pair<std::string, ad::Tensor>;

  /// Registers `value` under `name` and marks it trainable.
  void add(std::string name, ad::Tensor value);

  bool contains(std::string_view name) const;
  const ad::Tensor& get(std::string_view name) const;
  ad::Tensor& get(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t num_parameters() const;
  std::vector<std::string> names() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Sets every gradient to zero, allocating buffers that do not exist yet.
  void zero_grad();

  /// Deep copy with fresh storage.
  ParameterSet clone() const;

  /// Copies values from `other`, which must have identical names and shapes.
  void copy_values_from(const ParameterSet& other);

  /// Entries whose name starts with `prefix`, with the prefix stripped.
  ParameterSet subset(std::string_view prefix) const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace ssmail::nn
