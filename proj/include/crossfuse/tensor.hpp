#pragma once

// Reverse-mode autodiff on dense double tensors.
//
// A Tensor is a shared handle to a graph node holding a flat value buffer,
// an optional gradient buffer, and a backward closure that scatters the
// node's gradient into its parents. Ops only record graph structure when an
// operand requires grad, so forward passes through frozen parameters build
// no graph at all. backward() resets interior gradients, seeds the scalar
// root with 1, and walks the graph once in reverse topological order; leaf
// gradients accumulate across calls until zero_grad().

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "crossfuse/util.hpp"

namespace crossfuse {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;  // recorded iff requires_grad
  std::function<void(Node&)> backward;
};

// C += A(m,k) * B(k,n)
inline void gemm(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A(m,n) * B(k,n)^T  -> (m,k)
inline void gemm_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    double* crow = c + i * k;
    for (size_t j = 0; j < k; ++j) {
      const double* brow = b + j * n;
      double acc = 0.0;
      for (size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C += A(m,k)^T * B(m,n)  -> (k,n)
inline void gemm_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (size_t p = 0; p < k; ++p) {
      double av = arow[p];
      double* crow = c + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size())
      throw ShapeError(strprintf("tensor data has %zu values but shape %s holds %zu",
                                 values.size(), shape_str(shape).c_str(), shape_numel(shape)));
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->value.size(), 0.0);
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> v(shape_numel(shape), 0.0);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor full(Shape shape, double fill, bool requires_grad = false) {
    std::vector<double> v(shape_numel(shape), fill);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return checked().shape; }
  size_t rank() const { return checked().shape.size(); }
  size_t numel() const { return checked().value.size(); }
  bool requires_grad() const { return checked().requires_grad; }

  std::vector<double>& value() { return checked().value; }
  const std::vector<double>& value() const { return checked().value; }

  std::vector<double>& grad() {
    if (!checked().requires_grad) throw ValueError("tensor does not require grad");
    return node_->grad;
  }
  const std::vector<double>& grad() const {
    if (!checked().requires_grad) throw ValueError("tensor does not require grad");
    return node_->grad;
  }

  void zero_grad() {
    if (checked().requires_grad) node_->grad.assign(node_->value.size(), 0.0);
  }

  double item() const {
    if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_str(shape()));
    return node_->value[0];
  }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  detail::Node& checked() const {
    if (!node_) throw ValueError("operation on an undefined tensor");
    return *node_;
  }
  std::shared_ptr<detail::Node> node_;
};

inline void assert_all_finite(const Tensor& t, const char* what) {
  for (double v : t.value())
    if (!std::isfinite(v)) throw ValueError(strprintf("%s contains a non-finite value", what));
}

namespace detail {

inline Tensor make_result(Shape shape, std::vector<double> value,
                          std::vector<std::shared_ptr<Node>> parents,
                          std::function<void(Node&)> backward) {
  bool needs = false;
  for (const auto& p : parents)
    if (p->requires_grad) {
      needs = true;
      break;
    }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = needs;
  if (needs) {
    n->grad.assign(n->value.size(), 0.0);
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

// 0: identical shapes; 1: b's shape is a suffix of a's (b broadcast along
// leading axes); 2: the reverse. Anything else is a shape error.
inline int broadcast_kind(const Shape& a, const Shape& b, const char* op) {
  auto is_suffix = [](const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    size_t off = big.size() - small.size();
    for (size_t i = 0; i < small.size(); ++i)
      if (small[i] != big[off + i]) return false;
    return true;
  };
  if (a == b) return 0;
  if (is_suffix(b, a)) return 1;
  if (is_suffix(a, b)) return 2;
  throw ShapeError(strprintf("%s: shapes %s and %s neither match nor broadcast along leading axes",
                             op, shape_str(a).c_str(), shape_str(b).c_str()));
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  int kind = detail::broadcast_kind(a.shape(), b.shape(), "add");
  const Tensor& big = (kind == 2) ? b : a;
  const Tensor& lo = (kind == 2) ? a : b;
  const auto& bv = big.value();
  const auto& sv = lo.value();
  size_t sn = sv.size();
  std::vector<double> out(bv.size());
  for (size_t i = 0; i < bv.size(); ++i) out[i] = bv[i] + sv[i % sn];
  auto bw = [kind, sn](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    detail::Node& pbig = (kind == 2) ? pb : pa;
    detail::Node& plo = (kind == 2) ? pa : pb;
    if (pbig.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pbig.grad[i] += self.grad[i];
    if (plo.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) plo.grad[i % sn] += self.grad[i];
  };
  return detail::make_result(big.shape(), std::move(out), {a.node(), b.node()}, bw);
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  int kind = detail::broadcast_kind(a.shape(), b.shape(), "mul");
  const Tensor& big = (kind == 2) ? b : a;
  const Tensor& lo = (kind == 2) ? a : b;
  const auto& bv = big.value();
  const auto& sv = lo.value();
  size_t sn = sv.size();
  std::vector<double> out(bv.size());
  for (size_t i = 0; i < bv.size(); ++i) out[i] = bv[i] * sv[i % sn];
  auto bw = [kind, sn](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    detail::Node& pbig = (kind == 2) ? pb : pa;
    detail::Node& plo = (kind == 2) ? pa : pb;
    if (pbig.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pbig.grad[i] += self.grad[i] * plo.value[i % sn];
    if (plo.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) plo.grad[i % sn] += self.grad[i] * pbig.value[i];
  };
  return detail::make_result(big.shape(), std::move(out), {a.node(), b.node()}, bw);
}

inline Tensor scale(const Tensor& a, double c) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  auto bw = [c](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (p.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += c * self.grad[i];
  };
  return detail::make_result(a.shape(), std::move(out), {a.node()}, bw);
}

inline Tensor tanh(const Tensor& a) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = std::tanh(av[i]);
  auto bw = [](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double y = self.value[i];
      p.grad[i] += (1.0 - y * y) * self.grad[i];
    }
  };
  return detail::make_result(a.shape(), std::move(out), {a.node()}, bw);
}

// Softmax along the last axis, stabilised by subtracting the row max.
inline Tensor softmax(const Tensor& a) {
  if (a.rank() < 1) throw ShapeError("softmax requires rank >= 1, got " + shape_str(a.shape()));
  assert_all_finite(a, "softmax input");
  size_t last = a.shape().back();
  size_t rows = a.numel() / last;
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (size_t r = 0; r < rows; ++r) {
    const double* in = av.data() + r * last;
    double* o = out.data() + r * last;
    double mx = in[0];
    for (size_t j = 1; j < last; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (size_t j = 0; j < last; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (size_t j = 0; j < last; ++j) o[j] /= sum;
  }
  auto bw = [rows, last](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * last;
      const double* g = self.grad.data() + r * last;
      double* dx = p.grad.data() + r * last;
      double dot = 0.0;
      for (size_t j = 0; j < last; ++j) dot += y[j] * g[j];
      for (size_t j = 0; j < last; ++j) dx[j] += y[j] * (g[j] - dot);
    }
  };
  return detail::make_result(a.shape(), std::move(out), {a.node()}, bw);
}

// matmul over the last two axes. Equal leading axes batch together; a rank-2
// operand broadcasts across the other side's batch.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw ShapeError(strprintf("matmul requires rank >= 2 operands, got %s x %s",
                               shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
  size_t m = a.shape()[a.rank() - 2], k = a.shape()[a.rank() - 1];
  size_t k2 = b.shape()[b.rank() - 2], n = b.shape()[b.rank() - 1];
  if (k != k2)
    throw ShapeError(strprintf("matmul: inner dimensions disagree: %s x %s",
                               shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
  Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  Shape lead_b(b.shape().begin(), b.shape().end() - 2);
  bool bc_a = false, bc_b = false;
  Shape lead;
  if (lead_a == lead_b) {
    lead = lead_a;
  } else if (lead_a.empty()) {
    lead = lead_b;
    bc_a = true;
  } else if (lead_b.empty()) {
    lead = lead_a;
    bc_b = true;
  } else {
    throw ShapeError(strprintf("matmul: batch axes disagree: %s x %s",
                               shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
  }
  size_t batch = shape_numel(lead);
  Shape out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n, 0.0);
  const double* ap = a.value().data();
  const double* bp = b.value().data();
  for (size_t bi = 0; bi < batch; ++bi)
    detail::gemm(ap + (bc_a ? 0 : bi * m * k), bp + (bc_b ? 0 : bi * k * n),
                 out.data() + bi * m * n, m, k, n);
  auto bw = [m, k, n, batch, bc_a, bc_b](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    for (size_t bi = 0; bi < batch; ++bi) {
      const double* g = self.grad.data() + bi * m * n;
      if (pa.requires_grad)
        detail::gemm_nt(g, pb.value.data() + (bc_b ? 0 : bi * k * n),
                        pa.grad.data() + (bc_a ? 0 : bi * m * k), m, n, k);
      if (pb.requires_grad)
        detail::gemm_tn(pa.value.data() + (bc_a ? 0 : bi * m * k), g,
                        pb.grad.data() + (bc_b ? 0 : bi * k * n), m, k, n);
    }
  };
  return detail::make_result(std::move(out_shape), std::move(out), {a.node(), b.node()}, bw);
}

// Concatenate along the last axis.
inline Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() < 1)
    throw ShapeError(strprintf("concat: ranks disagree: %s vs %s",
                               shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
  for (size_t i = 0; i + 1 < a.rank(); ++i)
    if (a.shape()[i] != b.shape()[i])
      throw ShapeError(strprintf("concat: leading axes disagree: %s vs %s",
                                 shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
  size_t la = a.shape().back(), lb = b.shape().back();
  size_t rows = a.numel() / std::max<size_t>(la, 1);
  if (la == 0 || lb == 0) throw ShapeError("concat: empty last axis");
  Shape out_shape = a.shape();
  out_shape.back() = la + lb;
  std::vector<double> out(rows * (la + lb));
  for (size_t r = 0; r < rows; ++r) {
    const double* av = a.value().data() + r * la;
    const double* bv = b.value().data() + r * lb;
    double* o = out.data() + r * (la + lb);
    for (size_t j = 0; j < la; ++j) o[j] = av[j];
    for (size_t j = 0; j < lb; ++j) o[la + j] = bv[j];
  }
  auto bw = [rows, la, lb](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    for (size_t r = 0; r < rows; ++r) {
      const double* g = self.grad.data() + r * (la + lb);
      if (pa.requires_grad) {
        double* da = pa.grad.data() + r * la;
        for (size_t j = 0; j < la; ++j) da[j] += g[j];
      }
      if (pb.requires_grad) {
        double* db = pb.grad.data() + r * lb;
        for (size_t j = 0; j < lb; ++j) db[j] += g[la + j];
      }
    }
  };
  return detail::make_result(std::move(out_shape), std::move(out), {a.node(), b.node()}, bw);
}

inline Tensor reshape(const Tensor& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.numel())
    throw ShapeError(strprintf("reshape: %s has %zu elements, target %s holds %zu",
                               shape_str(a.shape()).c_str(), a.numel(),
                               shape_str(new_shape).c_str(), shape_numel(new_shape)));
  auto bw = [](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  };
  return detail::make_result(std::move(new_shape), a.value(), {a.node()}, bw);
}

// Swap the last two axes.
inline Tensor transpose_last(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose_last requires rank >= 2, got " + shape_str(a.shape()));
  size_t r = a.shape()[a.rank() - 2], c = a.shape()[a.rank() - 1];
  size_t batch = a.numel() / (r * c);
  Shape out_shape = a.shape();
  std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
  std::vector<double> out(a.numel());
  for (size_t bi = 0; bi < batch; ++bi) {
    const double* in = a.value().data() + bi * r * c;
    double* o = out.data() + bi * r * c;
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) o[j * r + i] = in[i * c + j];
  }
  auto bw = [r, c, batch](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (size_t bi = 0; bi < batch; ++bi) {
      const double* g = self.grad.data() + bi * r * c;
      double* dp = p.grad.data() + bi * r * c;
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) dp[i * c + j] += g[j * r + i];
    }
  };
  return detail::make_result(std::move(out_shape), std::move(out), {a.node()}, bw);
}

// Mean along one axis; the axis is removed from the shape.
inline Tensor mean(const Tensor& a, size_t axis) {
  if (axis >= a.rank())
    throw ShapeError(strprintf("mean: axis %zu out of range for %s", axis, shape_str(a.shape()).c_str()));
  size_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
  for (size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
  size_t ext = a.shape()[axis];
  if (ext == 0) throw ShapeError("mean over an empty axis");
  Shape out_shape;
  for (size_t i = 0; i < a.rank(); ++i)
    if (i != axis) out_shape.push_back(a.shape()[i]);
  std::vector<double> out(outer * inner, 0.0);
  const double* in = a.value().data();
  for (size_t o = 0; o < outer; ++o)
    for (size_t e = 0; e < ext; ++e) {
      const double* src = in + (o * ext + e) * inner;
      double* dst = out.data() + o * inner;
      for (size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  for (double& v : out) v /= static_cast<double>(ext);
  auto bw = [outer, ext, inner](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    double inv = 1.0 / static_cast<double>(ext);
    for (size_t o = 0; o < outer; ++o)
      for (size_t e = 0; e < ext; ++e) {
        const double* g = self.grad.data() + o * inner;
        double* dp = p.grad.data() + (o * ext + e) * inner;
        for (size_t i = 0; i < inner; ++i) dp[i] += g[i] * inv;
      }
  };
  return detail::make_result(std::move(out_shape), std::move(out), {a.node()}, bw);
}

inline Tensor mean_all(const Tensor& a) {
  size_t n = a.numel();
  if (n == 0) throw ShapeError("mean_all of an empty tensor");
  double s = 0.0;
  for (double v : a.value()) s += v;
  auto bw = [n](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    double g = self.grad[0] / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) p.grad[i] += g;
  };
  return detail::make_result({}, {s / static_cast<double>(n)}, {a.node()}, bw);
}

inline Tensor sum_all(const Tensor& a) {
  size_t n = a.numel();
  double s = 0.0;
  for (double v : a.value()) s += v;
  auto bw = [n](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    double g = self.grad[0];
    for (size_t i = 0; i < n; ++i) p.grad[i] += g;
  };
  return detail::make_result({}, {s}, {a.node()}, bw);
}

// Contiguous range along the leading axis: rows [begin, end).
inline Tensor slice_rows(const Tensor& a, size_t begin, size_t end) {
  if (a.rank() < 1) throw ShapeError("slice_rows requires rank >= 1");
  size_t rows = a.shape()[0];
  if (begin >= end || end > rows)
    throw ShapeError(strprintf("slice_rows: range [%zu, %zu) invalid for leading axis %zu", begin, end, rows));
  size_t stride = a.numel() / rows;
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  std::vector<double> out(a.value().begin() + begin * stride, a.value().begin() + end * stride);
  auto bw = [begin, end, stride](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    size_t count = (end - begin) * stride;
    for (size_t i = 0; i < count; ++i) p.grad[begin * stride + i] += self.grad[i];
  };
  return detail::make_result(std::move(out_shape), std::move(out), {a.node()}, bw);
}

// Gather rows of a (V, d) table by id; backward scatter-adds into the table.
inline Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw ShapeError("embedding_rows requires a rank-2 table, got " + shape_str(table.shape()));
  size_t v = table.shape()[0], d = table.shape()[1];
  for (int id : ids)
    if (id < 0 || static_cast<size_t>(id) >= v)
      throw ValueError(strprintf("embedding_rows: id %d out of range [0, %zu)", id, v));
  std::vector<double> out(ids.size() * d);
  for (size_t i = 0; i < ids.size(); ++i) {
    const double* src = table.value().data() + static_cast<size_t>(ids[i]) * d;
    double* dst = out.data() + i * d;
    for (size_t j = 0; j < d; ++j) dst[j] = src[j];
  }
  auto bw = [ids, d](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (size_t i = 0; i < ids.size(); ++i) {
      const double* g = self.grad.data() + i * d;
      double* dp = p.grad.data() + static_cast<size_t>(ids[i]) * d;
      for (size_t j = 0; j < d; ++j) dp[j] += g[j];
    }
  };
  return detail::make_result({ids.size(), d}, std::move(out), {table.node()}, bw);
}

// Layer normalisation over the last axis with learned gain and shift.
// Population variance; backward uses the standard closed form
//   dx = inv * (dxh - mean(dxh) - xh * mean(dxh * xh))  per row.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  if (x.rank() < 1) throw ShapeError("layer_norm requires rank >= 1");
  size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || shift.shape() != Shape{d})
    throw ShapeError(strprintf("layer_norm: gain %s / shift %s must both be (%zu,)",
                               shape_str(gain.shape()).c_str(), shape_str(shift.shape()).c_str(), d));
  if (!(eps > 0.0)) throw ValueError("layer_norm: eps must be positive");
  size_t rows = x.numel() / d;
  std::vector<double> xhat(x.numel());
  std::vector<double> inv(rows);
  std::vector<double> out(x.numel());
  const double* xp = x.value().data();
  const double* gp = gain.value().data();
  const double* sp = shift.value().data();
  for (size_t r = 0; r < rows; ++r) {
    const double* row = xp + r * d;
    double mu = 0.0;
    for (size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (size_t j = 0; j < d; ++j) {
      double c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double iv = 1.0 / std::sqrt(var + eps);
    inv[r] = iv;
    double* xh = xhat.data() + r * d;
    double* o = out.data() + r * d;
    for (size_t j = 0; j < d; ++j) {
      xh[j] = (row[j] - mu) * iv;
      o[j] = gp[j] * xh[j] + sp[j];
    }
  }
  auto bw = [rows, d, xhat = std::move(xhat), inv = std::move(inv)](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pg = *self.parents[1];
    detail::Node& ps = *self.parents[2];
    const double* gv = self.parents[1]->value.data();
    std::vector<double> dxh(d);
    for (size_t r = 0; r < rows; ++r) {
      const double* g = self.grad.data() + r * d;
      const double* xh = xhat.data() + r * d;
      if (pg.requires_grad)
        for (size_t j = 0; j < d; ++j) pg.grad[j] += g[j] * xh[j];
      if (ps.requires_grad)
        for (size_t j = 0; j < d; ++j) ps.grad[j] += g[j];
      if (px.requires_grad) {
        double m1 = 0.0, m2 = 0.0;
        for (size_t j = 0; j < d; ++j) {
          dxh[j] = g[j] * gv[j];
          m1 += dxh[j];
          m2 += dxh[j] * xh[j];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        double* dx = px.grad.data() + r * d;
        for (size_t j = 0; j < d; ++j) dx[j] += inv[r] * (dxh[j] - m1 - xh[j] * m2);
      }
    }
  };
  return detail::make_result(x.shape(), std::move(out), {x.node(), gain.node(), shift.node()}, bw);
}

// Reverse pass from a scalar root. Interior gradients are reset so repeated
// calls propagate a fresh seed; leaf gradients accumulate across calls.
inline void backward(const Tensor& root) {
  if (root.numel() != 1)
    throw ValueError("backward requires a scalar root, got shape " + shape_str(root.shape()));
  if (!root.requires_grad()) throw ValueError("backward on a tensor that does not require grad");
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  struct Frame {
    detail::Node* n;
    size_t next;
  };
  std::vector<Frame> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      detail::Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  for (detail::Node* n : order)
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

// Central-difference check of d f(x) / dx. Returns the largest relative
// error max(|analytic - fd| / max(1, |analytic|)) over all coordinates.
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-5) {
  if (!(h >= 1e-7 && h <= 1e-3))
    throw ValueError(strprintf("grad_check: step %g outside [1e-7, 1e-3]", h));
  if (!x.requires_grad()) throw ValueError("grad_check: x must require grad");
  x.zero_grad();
  Tensor loss = f(x);
  if (loss.numel() != 1) throw ValueError("grad_check: objective must be scalar");
  backward(loss);
  std::vector<double> analytic = x.grad();
  double worst = 0.0;
  for (size_t i = 0; i < x.numel(); ++i) {
    double orig = x.value()[i];
    x.value()[i] = orig + h;
    double fp = f(x).item();
    x.value()[i] = orig - h;
    double fm = f(x).item();
    x.value()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw ValueError("grad_check: objective produced a non-finite value while probing");
    double fd = (fp - fm) / (2.0 * h);
    double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace crossfuse
