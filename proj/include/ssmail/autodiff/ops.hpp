#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ssmail/autodiff/tensor.hpp"

// Differentiable operations. Every op records itself on the active Tape when
// at least one input requires a gradient.
//
// Binary elementwise ops broadcast over trailing dimensions only: the shape
// of one operand must be a suffix of the other's (a rank-0 scalar is a suffix
// of everything).

namespace ssmail::ad {

enum class Elementwise { add, sub, mul, div, neg, exp, log, tanh, sigmoid, relu, square, softplus, sqrt };
enum class Reduce { sum, mean, max };

Tensor elementwise(Elementwise op, const Tensor& a);
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sqrt(const Tensor& a);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(neg(a), s); }

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// 2-D transpose.
Tensor transpose(const Tensor& a);

/// Full reduction to a rank-0 scalar, or reduction along one axis.
Tensor reduce(Reduce op, const Tensor& a, std::optional<std::size_t> axis = std::nullopt);
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor max(const Tensor& a);
Tensor max(const Tensor& a, std::size_t axis);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor reshape(const Tensor& a, Shape shape);
/// Slice [start, start+length) along `axis`.
Tensor narrow(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);

/// Row gather over the leading dimension: out[r] = a[index[r]].
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);
/// Row scatter-sum over the leading dimension: out[segment[r]] += a[r].
Tensor segment_sum(const Tensor& a, std::span<const std::size_t> segment, std::size_t num_segments);
/// out[r, ...] = a[r, ...] * s[r]; `s` holds one value per leading row.
Tensor scale_rows(const Tensor& a, const Tensor& s);

/// Forward value of `hard`, gradient of `soft` (straight-through estimator).
Tensor straight_through(const Tensor& soft, const Tensor& hard);

}  // namespace ssmail::ad
