#include "ssmail/autodiff/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/error.hpp"

namespace ssmail::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Tape* recorder(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = Tape::active();
  if (tape == nullptr) return nullptr;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

Tape* recorder(const std::vector<Tensor>& inputs) {
  Tape* tape = Tape::active();
  if (tape == nullptr) return nullptr;
  for (const auto& t : inputs) {
    if (t.requires_grad()) return tape;
  }
  return nullptr;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

struct AxisSplit {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw Error(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " + shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

double softplus_value(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const char* unary_name(Elementwise op) {
  switch (op) {
    case Elementwise::neg: return "neg";
    case Elementwise::exp: return "exp";
    case Elementwise::log: return "log";
    case Elementwise::tanh: return "tanh";
    case Elementwise::sigmoid: return "sigmoid";
    case Elementwise::relu: return "relu";
    case Elementwise::square: return "square";
    case Elementwise::softplus: return "softplus";
    case Elementwise::sqrt: return "sqrt";
    default: return "binary";
  }
}

}  // namespace

Tensor elementwise(Elementwise op, const Tensor& a) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  switch (op) {
    case Elementwise::neg:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = -x[i];
      break;
    case Elementwise::exp:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
      break;
    case Elementwise::log:
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0)) throw Error("log: non-positive input " + std::to_string(x[i]));
        y[i] = std::log(x[i]);
      }
      break;
    case Elementwise::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      break;
    case Elementwise::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_value(x[i]);
      break;
    case Elementwise::relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : 0.0;
      break;
    case Elementwise::square:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i];
      break;
    case Elementwise::softplus:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = softplus_value(x[i]);
      break;
    case Elementwise::sqrt:
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < 0.0) throw Error("sqrt: negative input " + std::to_string(x[i]));
        y[i] = std::sqrt(x[i]);
      }
      break;
    default:
      throw Error("elementwise: binary op requires two operands");
  }

  Tensor out = make_tensor(a.shape(), std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    tape->push(unary_name(op), {a.shared_impl()}, out, [op, pa, po] {
      const auto& go = po->grad;
      const auto& xv = pa->data;
      const auto& yv = po->data;
      auto ga = pa->grad_buffer();
      const std::size_t n = go.size();
      switch (op) {
        case Elementwise::neg:
          for (std::size_t i = 0; i < n; ++i) ga[i] -= go[i];
          break;
        case Elementwise::exp:
          for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * yv[i];
          break;
        case Elementwise::log:
          for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] / xv[i];
          break;
        case Elementwise::tanh:
          for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * (1.0 - yv[i] * yv[i]);
          break;
        case Elementwise::sigmoid:
          for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * yv[i] * (1.0 - yv[i]);
          break;
        case Elementwise::relu:
          for (std::size_t i = 0; i < n; ++i) ga[i] += xv[i] > 0 ? go[i] : 0.0;
          break;
        case Elementwise::square:
          for (std::size_t i = 0; i < n; ++i) ga[i] += 2.0 * xv[i] * go[i];
          break;
        case Elementwise::softplus:
          for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * sigmoid_value(xv[i]);
          break;
        case Elementwise::sqrt:
          for (std::size_t i = 0; i < n; ++i) ga[i] += yv[i] > 0 ? go[i] * 0.5 / yv[i] : 0.0;
          break;
        default:
          break;
      }
    });
  }
  return out;
}

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  const char* name = nullptr;
  switch (op) {
    case Elementwise::add: name = "add"; break;
    case Elementwise::sub: name = "sub"; break;
    case Elementwise::mul: name = "mul"; break;
    case Elementwise::div: name = "div"; break;
    default: throw Error("elementwise: unary op given two operands");
  }
  Shape out_shape;
  if (is_suffix(b.shape(), a.shape())) {
    out_shape = a.shape();
  } else if (is_suffix(a.shape(), b.shape())) {
    out_shape = b.shape();
  } else {
    throw Error(std::string(name) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                " are not trailing-broadcast compatible");
  }
  const auto& x = a.values();
  const auto& z = b.values();
  const std::size_t na = x.size();
  const std::size_t nb = z.size();
  const std::size_t n = numel_of(out_shape);
  std::vector<double> y(n);
  switch (op) {
    case Elementwise::add:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i % na] + z[i % nb];
      break;
    case Elementwise::sub:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i % na] - z[i % nb];
      break;
    case Elementwise::mul:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i % na] * z[i % nb];
      break;
    default:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i % na] / z[i % nb];
      break;
  }

  Tensor out = make_tensor(std::move(out_shape), std::move(y));
  if (Tape* tape = recorder({&a, &b})) {
    TensorImpl* pa = a.impl();
    TensorImpl* pb = b.impl();
    TensorImpl* po = out.impl();
    tape->push(name, {a.shared_impl(), b.shared_impl()}, out, [op, pa, pb, po] {
      const auto& go = po->grad;
      const auto& xv = pa->data;
      const auto& zv = pb->data;
      const std::size_t n = go.size();
      const std::size_t na = xv.size();
      const std::size_t nb = zv.size();
      if (pa->requires_grad) {
        auto ga = pa->grad_buffer();
        switch (op) {
          case Elementwise::add:
          case Elementwise::sub:
            for (std::size_t i = 0; i < n; ++i) ga[i % na] += go[i];
            break;
          case Elementwise::mul:
            for (std::size_t i = 0; i < n; ++i) ga[i % na] += go[i] * zv[i % nb];
            break;
          default:
            for (std::size_t i = 0; i < n; ++i) ga[i % na] += go[i] / zv[i % nb];
            break;
        }
      }
      if (pb->requires_grad) {
        auto gb = pb->grad_buffer();
        switch (op) {
          case Elementwise::add:
            for (std::size_t i = 0; i < n; ++i) gb[i % nb] += go[i];
            break;
          case Elementwise::sub:
            for (std::size_t i = 0; i < n; ++i) gb[i % nb] -= go[i];
            break;
          case Elementwise::mul:
            for (std::size_t i = 0; i < n; ++i) gb[i % nb] += go[i] * xv[i % na];
            break;
          default:
            for (std::size_t i = 0; i < n; ++i) {
              const double d = zv[i % nb];
              gb[i % nb] -= go[i] * xv[i % na] / (d * d);
            }
            break;
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::div, a, b); }
Tensor neg(const Tensor& a) { return elementwise(Elementwise::neg, a); }
Tensor exp(const Tensor& a) { return elementwise(Elementwise::exp, a); }
Tensor log(const Tensor& a) { return elementwise(Elementwise::log, a); }
Tensor tanh(const Tensor& a) { return elementwise(Elementwise::tanh, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(Elementwise::sigmoid, a); }
Tensor relu(const Tensor& a) { return elementwise(Elementwise::relu, a); }
Tensor square(const Tensor& a) { return elementwise(Elementwise::square, a); }
Tensor softplus(const Tensor& a) { return elementwise(Elementwise::softplus, a); }
Tensor sqrt(const Tensor& a) { return elementwise(Elementwise::sqrt, a); }

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> y(a.values());
  for (auto& v : y) v *= factor;
  Tensor out = make_tensor(a.shape(), std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    tape->push("scale", {a.shared_impl()}, out, [factor, pa, po] {
      auto ga = pa->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * po->grad[i];
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double offset) {
  std::vector<double> y(a.values());
  for (auto& v : y) v += offset;
  Tensor out = make_tensor(a.shape(), std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    tape->push("add_scalar", {a.shared_impl()}, out, [pa, po] {
      auto ga = pa->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += po->grad[i];
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw Error("matmul: expected 2-D operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw Error("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> y(m * n);
  {
    ConstMap A(a.values().data(), m, k);
    ConstMap B(b.values().data(), k, n);
    MutMap Y(y.data(), m, n);
    Y.noalias() = A * B;
  }
  Tensor out = make_tensor({m, n}, std::move(y));
  if (Tape* tape = recorder({&a, &b})) {
    TensorImpl* pa = a.impl();
    TensorImpl* pb = b.impl();
    TensorImpl* po = out.impl();
    tape->push("matmul", {a.shared_impl(), b.shared_impl()}, out, [pa, pb, po, m, k, n] {
      ConstMap G(po->grad.data(), m, n);
      if (pa->requires_grad) {
        MutMap GA(pa->grad_buffer().data(), m, k);
        GA.noalias() += G * ConstMap(pb->data.data(), k, n).transpose();
      }
      if (pb->requires_grad) {
        MutMap GB(pb->grad_buffer().data(), k, n);
        GB.noalias() += ConstMap(pa->data.data(), m, k).transpose() * G;
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw Error("transpose: expected 2-D operand, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0);
  const std::size_t n = a.dim(1);
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = a.values()[i * n + j];
  Tensor out = make_tensor({n, m}, std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    tape->push("transpose", {a.shared_impl()}, out, [pa, po, m, n] {
      auto ga = pa->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += po->grad[j * m + i];
    });
  }
  return out;
}

Tensor reduce(Reduce op, const Tensor& a, std::optional<std::size_t> axis) {
  const char* name = op == Reduce::sum ? "sum" : op == Reduce::mean ? "mean" : "max";
  const auto& x = a.values();
  AxisSplit s{1, x.size(), 1};
  Shape out_shape;
  if (axis) {
    s = split_axis(a.shape(), *axis, name);
    out_shape = a.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(*axis));
  }
  std::vector<double> y(s.outer * s.inner, 0.0);
  std::vector<std::size_t> argmax;
  if (op == Reduce::max) argmax.assign(y.size(), 0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double acc = op == Reduce::max ? -std::numeric_limits<double>::infinity() : 0.0;
      std::size_t best = base;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double v = x[base + l * s.inner];
        if (op == Reduce::max) {
          if (v > acc) {
            acc = v;
            best = base + l * s.inner;
          }
        } else {
          acc += v;
        }
      }
      if (op == Reduce::mean) acc /= static_cast<double>(s.len);
      y[o * s.inner + in] = acc;
      if (op == Reduce::max) argmax[o * s.inner + in] = best;
    }
  }
  Tensor out = make_tensor(std::move(out_shape), std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    tape->push(name, {a.shared_impl()}, out, [op, s, pa, po, argmax = std::move(argmax)] {
      auto ga = pa->grad_buffer();
      const auto& go = po->grad;
      if (op == Reduce::max) {
        for (std::size_t i = 0; i < go.size(); ++i) ga[argmax[i]] += go[i];
        return;
      }
      const double w = op == Reduce::mean ? 1.0 / static_cast<double>(s.len) : 1.0;
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
          for (std::size_t in = 0; in < s.inner; ++in)
            ga[(o * s.len + l) * s.inner + in] += w * go[o * s.inner + in];
    });
  }
  return out;
}

Tensor sum(const Tensor& a) { return reduce(Reduce::sum, a); }
Tensor sum(const Tensor& a, std::size_t axis) { return reduce(Reduce::sum, a, axis); }
Tensor mean(const Tensor& a) { return reduce(Reduce::mean, a); }
Tensor mean(const Tensor& a, std::size_t axis) { return reduce(Reduce::mean, a, axis); }
Tensor max(const Tensor& a) { return reduce(Reduce::max, a); }
Tensor max(const Tensor& a, std::size_t axis) { return reduce(Reduce::max, a, axis); }

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw Error("concat: axis " + std::to_string(axis) + " invalid for shape " + shape_str(ref));
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& sh = p.shape();
    bool ok = sh.size() == ref.size();
    for (std::size_t i = 0; ok && i < sh.size(); ++i) ok = (i == axis) || sh[i] == ref[i];
    if (!ok) throw Error("concat: incompatible shapes " + shape_str(ref) + " and " + shape_str(sh));
    total += sh[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  const auto s = split_axis(out_shape, axis, "concat");
  std::vector<double> y(numel_of(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.shape()[axis];
    const auto& x = p.values();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o * len * s.inner), len * s.inner,
                  y.begin() + static_cast<std::ptrdiff_t>((o * total + off) * s.inner));
    }
    off += len;
  }
  Tensor out = make_tensor(std::move(out_shape), std::move(y));
  if (Tape* tape = recorder(parts)) {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::vector<TensorImpl*> raw;
    for (const auto& p : parts) {
      inputs.push_back(p.shared_impl());
      raw.push_back(p.impl());
    }
    TensorImpl* po = out.impl();
    tape->push("concat", std::move(inputs), out, [raw, offsets, s, total, axis, po] {
      for (std::size_t k = 0; k < raw.size(); ++k) {
        if (!raw[k]->requires_grad) continue;
        const std::size_t len = raw[k]->shape[axis];
        auto g = raw[k]->grad_buffer();
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = po->grad.data() + (o * total + offsets[k]) * s.inner;
          double* dst = g.data() + o * len * s.inner;
          for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto s = split_axis(a.shape(), axis, "softmax");
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) {
        const double v = x[base + l * s.inner];
        if (std::isnan(v)) throw Error("softmax: NaN input");
        m = std::max(m, v);
      }
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double e = std::exp(x[base + l * s.inner] - m);
        y[base + l * s.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) y[base + l * s.inner] /= z;
    }
  }
  Tensor out = make_tensor(a.shape(), std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    tape->push("softmax", {a.shared_impl()}, out, [s, pa, po] {
      auto ga = pa->grad_buffer();
      const auto& go = po->grad;
      const auto& yv = po->data;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.len * s.inner + in;
          double dot = 0.0;
          for (std::size_t l = 0; l < s.len; ++l) dot += go[base + l * s.inner] * yv[base + l * s.inner];
          for (std::size_t l = 0; l < s.len; ++l) {
            const std::size_t i = base + l * s.inner;
            ga[i] += yv[i] * (go[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw Error("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  Tensor out = make_tensor(std::move(shape), a.values());
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    tape->push("reshape", {a.shared_impl()}, out, [pa, po] {
      auto ga = pa->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += po->grad[i];
    });
  }
  return out;
}

Tensor narrow(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const auto s = split_axis(a.shape(), axis, "narrow");
  if (length == 0 || start + length > s.len) {
    throw Error("narrow: range [" + std::to_string(start) + "," + std::to_string(start + length) +
                ") out of bounds for shape " + shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  const auto& x = a.values();
  std::vector<double> y(s.outer * length * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>((o * s.len + start) * s.inner), length * s.inner,
                y.begin() + static_cast<std::ptrdiff_t>(o * length * s.inner));
  }
  Tensor out = make_tensor(std::move(out_shape), std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    tape->push("narrow", {a.shared_impl()}, out, [s, start, length, pa, po] {
      auto ga = pa->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        const double* src = po->grad.data() + o * length * s.inner;
        double* dst = ga.data() + (o * s.len + start) * s.inner;
        for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  if (a.rank() == 0) throw Error("gather_rows: scalar input");
  if (index.empty()) throw Error("gather_rows: empty index");
  const std::size_t rows = a.dim(0);
  const std::size_t width = a.numel() / rows;
  Shape out_shape = a.shape();
  out_shape[0] = index.size();
  std::vector<double> y(index.size() * width);
  const auto& x = a.values();
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= rows) throw Error("gather_rows: index " + std::to_string(index[r]) + " out of range");
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(index[r] * width), width,
                y.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  Tensor out = make_tensor(std::move(out_shape), std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    std::vector<std::size_t> idx(index.begin(), index.end());
    tape->push("gather_rows", {a.shared_impl()}, out, [idx = std::move(idx), width, pa, po] {
      auto ga = pa->grad_buffer();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* src = po->grad.data() + r * width;
        double* dst = ga.data() + idx[r] * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    });
  }
  return out;
}

Tensor segment_sum(const Tensor& a, std::span<const std::size_t> segment, std::size_t num_segments) {
  if (a.rank() == 0) throw Error("segment_sum: scalar input");
  const std::size_t rows = a.dim(0);
  if (segment.size() != rows) {
    throw Error("segment_sum: " + std::to_string(segment.size()) + " segment ids for " + std::to_string(rows) + " rows");
  }
  if (num_segments == 0) throw Error("segment_sum: zero segments");
  const std::size_t width = a.numel() / rows;
  Shape out_shape = a.shape();
  out_shape[0] = num_segments;
  std::vector<double> y(num_segments * width, 0.0);
  const auto& x = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    if (segment[r] >= num_segments) throw Error("segment_sum: segment id out of range");
    const double* src = x.data() + r * width;
    double* dst = y.data() + segment[r] * width;
    for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
  }
  Tensor out = make_tensor(std::move(out_shape), std::move(y));
  if (Tape* tape = recorder({&a})) {
    TensorImpl* pa = a.impl();
    TensorImpl* po = out.impl();
    std::vector<std::size_t> seg(segment.begin(), segment.end());
    tape->push("segment_sum", {a.shared_impl()}, out, [seg = std::move(seg), width, pa, po] {
      auto ga = pa->grad_buffer();
      for (std::size_t r = 0; r < seg.size(); ++r) {
        const double* src = po->grad.data() + seg[r] * width;
        double* dst = ga.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    });
  }
  return out;
}

Tensor scale_rows(const Tensor& a, const Tensor& s) {
  if (a.rank() == 0) throw Error("scale_rows: scalar input");
  const std::size_t rows = a.dim(0);
  if (s.numel() != rows) {
    throw Error("scale_rows: scale " + shape_str(s.shape()) + " does not match rows of " + shape_str(a.shape()));
  }
  const std::size_t width = a.numel() / rows;
  const auto& x = a.values();
  const auto& w = s.values();
  std::vector<double> y(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) y[r * width + c] = x[r * width + c] * w[r];
  Tensor out = make_tensor(a.shape(), std::move(y));
  if (Tape* tape = recorder({&a, &s})) {
    TensorImpl* pa = a.impl();
    TensorImpl* ps = s.impl();
    TensorImpl* po = out.impl();
    tape->push("scale_rows", {a.shared_impl(), s.shared_impl()}, out, [rows, width, pa, ps, po] {
      const auto& go = po->grad;
      if (pa->requires_grad) {
        auto ga = pa->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < width; ++c) ga[r * width + c] += go[r * width + c] * ps->data[r];
      }
      if (ps->requires_grad) {
        auto gs = ps->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < width; ++c) acc += go[r * width + c] * pa->data[r * width + c];
          gs[r] += acc;
        }
      }
    });
  }
  return out;
}

Tensor straight_through(const Tensor& soft, const Tensor& hard) {
  if (soft.shape() != hard.shape()) {
    throw Error("straight_through: shapes " + shape_str(soft.shape()) + " and " + shape_str(hard.shape()) + " differ");
  }
  return add(soft, sub(hard.detach(), soft.detach()));
}

}  // namespace ssmail::ad
