#include "ssmail/nn/parameter_set.hpp"

#include <algorithm>

#include "ssmail/common/error.hpp"

namespace ssmail::nn {

void ParameterSet::add(std::string name, ad::Tensor value) {
  if (contains(name)) throw Error("ParameterSet: duplicate parameter '" + name + "'");
  if (!value.is_leaf()) value = value.detach();
  value.set_requires_grad(true);
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

const ad::Tensor& ParameterSet::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw Error("ParameterSet: no parameter named '" + std::string(name) + "'");
}

ad::Tensor& ParameterSet::get(std::string_view name) {
  return const_cast<ad::Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParameterSet::num_parameters() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) {
    auto g = e.second.mutable_grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& e : entries_) out.add(e.first, e.second.clone());
  return out;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) throw Error("ParameterSet: size mismatch in copy");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [name, src] = other.entries_[i];
    auto& [dst_name, dst] = entries_[i];
    if (name != dst_name) throw Error("ParameterSet: name mismatch '" + dst_name + "' vs '" + name + "'");
    if (src.shape() != dst.shape()) throw Error("ParameterSet: shape mismatch for '" + name + "'");
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
}

ParameterSet ParameterSet::subset(std::string_view prefix) const {
  ParameterSet out;
  for (const auto& e : entries_) {
    if (e.first.starts_with(prefix)) out.entries_.emplace_back(e.first.substr(prefix.size()), e.second);
  }
  return out;
}

}  // namespace ssmail::nn
