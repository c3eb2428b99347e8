// Copyright 2026 The mcforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "mcforge/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "mcforge/error.hpp"

namespace mcforge::ad {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using CMap = Eigen::Map<const Mat<T>>;
template <typename T>
using MMap = Eigen::Map<Mat<T>>;

template <typename T>
CMap<T> cmap(const Tape<T>& t, std::uint32_t id) {
  const Shape s = t.shape(id);
  return CMap<T>(t.value(id), static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}

template <typename T>
MMap<T> gmap(Tape<T>& t, std::uint32_t id) {
  const Shape s = t.shape(id);
  return MMap<T>(t.grad_buffer(id), static_cast<Eigen::Index>(s.rows),
                 static_cast<Eigen::Index>(s.cols));
}

template <typename T>
CMap<T> dmap(const Tape<T>& t, std::uint32_t id) {
  const Shape s = t.shape(id);
  return CMap<T>(t.grad_or_null(id), static_cast<Eigen::Index>(s.rows),
                 static_cast<Eigen::Index>(s.cols));
}

[[noreturn]] void mismatch(const char* op, Shape a, Shape b) {
  throw InvalidArgument(std::string("ad::") + op + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <typename T>
Tape<T>& same_tape(const char* op, Var<T> a, Var<T> b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw InvalidArgument(std::string("ad::") + op + ": operands live on different tapes");
  }
  return *a.tape;
}

template <typename T>
Tape<T>& tape_of(const char* op, Var<T> a) {
  if (a.tape == nullptr) throw InvalidArgument(std::string("ad::") + op + ": null variable");
  return *a.tape;
}

// Shared scaffolding for elementwise unary ops: `f` maps x to y and `df`
// returns dy/dx from (x, y).
template <typename T, typename F, typename DF>
Var<T> unary(const char* op, Var<T> a, F f, DF df) {
  Tape<T>& t = tape_of(op, a);
  const Shape s = t.shape(a.id);
  const T* x = t.value(a.id);
  std::vector<T> y(s.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(x[i]);
  const std::uint32_t ia = a.id;
  return t.push(s, std::move(y), t.requires_grad(ia), [ia, df](Tape<T>& tp, std::uint32_t self) {
    const T* xv = tp.value(ia);
    const T* yv = tp.value(self);
    const T* dy = tp.grad_or_null(self);
    T* dx = tp.grad_buffer(ia);
    const std::size_t n = tp.shape(self).size();
    for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * df(xv[i], yv[i]);
  });
}

}  // namespace

std::string Shape::str() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

// ---- ParamStore ----

template <typename T>
std::size_t ParamStore<T>::add(std::string name, Shape shape) {
  if (shape.size() == 0) throw InvalidArgument("parameter '" + name + "' has an empty shape");
  if (index_.count(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  index_.emplace(name, params_.size());
  auto p = std::make_unique<Parameter<T>>();
  p->name = std::move(name);
  p->shape = shape;
  p->value.assign(shape.size(), T(0));
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

template <typename T>
bool ParamStore<T>::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

template <typename T>
std::size_t ParamStore<T>::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <typename T>
ParamStore<T> ParamStore<T>::clone() const {
  ParamStore<T> out;
  for (const auto& p : params_) out.at(out.add(p->name, p->shape)).value = p->value;
  return out;
}

template <typename T>
Gradients<T> zero_gradients(const ParamStore<T>& store) {
  Gradients<T> g(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) g[i].assign(store.at(i).value.size(), T(0));
  return g;
}

template <typename T>
void accumulate(Gradients<T>& out, const Gradients<T>& in) {
  if (out.size() != in.size()) throw InvalidArgument("accumulate: gradient sets differ in size");
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (out[i].size() != in[i].size()) throw InvalidArgument("accumulate: gradient shapes differ");
    for (std::size_t k = 0; k < in[i].size(); ++k) out[i][k] += in[i][k];
  }
}

// ---- Var / Tape ----

template <typename T>
Shape Var<T>::shape() const {
  return tape->shape(id);
}

template <typename T>
std::span<const T> Var<T>::value() const {
  return {tape->value(id), tape->shape(id).size()};
}

template <typename T>
T Var<T>::item() const {
  if (shape() != Shape{1, 1}) throw InvalidArgument("item() on non-scalar " + shape().str());
  return tape->value(id)[0];
}

template <typename T>
const T* Tape<T>::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? n.external : n.own.data();
}

template <typename T>
T* Tape<T>::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.shape.size(), T(0));
  return n.grad.data();
}

template <typename T>
const T* Tape<T>::grad_or_null(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.grad.empty() ? nullptr : n.grad.data();
}

template <typename T>
Var<T> Tape<T>::push(Shape shape, std::vector<T> value, bool requires_grad, Backward backward) {
  if (value.size() != shape.size()) {
    throw InvalidArgument("tape: value length " + std::to_string(value.size()) +
                          " does not match shape " + shape.str());
  }
  if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max()) throw Error("tape is full");
  Node n;
  n.shape = shape;
  n.own = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::param(std::size_t index) {
  if (store_ == nullptr) throw InvalidArgument("tape has no parameter store");
  if (index >= store_->size()) throw InvalidArgument("parameter index out of range");
  auto it = param_nodes_.find(index);
  if (it != param_nodes_.end()) return Var<T>{this, it->second};
  const Parameter<T>& p = store_->at(index);
  Node n;
  n.shape = p.shape;
  n.external = p.value.data();
  n.requires_grad = true;
  n.param = static_cast<std::int64_t>(index);
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_.emplace(index, id);
  return Var<T>{this, id};
}

template <typename T>
Var<T> Tape<T>::param(std::string_view name) {
  if (store_ == nullptr) throw InvalidArgument("tape has no parameter store");
  return param(store_->index_of(name));
}

template <typename T>
Var<T> Tape<T>::constant(Shape shape, std::vector<T> value) {
  return push(shape, std::move(value), false, nullptr);
}

template <typename T>
Var<T> Tape<T>::variable(Shape shape, std::vector<T> value) {
  Var<T> v = push(shape, std::move(value), false, nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

template <typename T>
Gradients<T> Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) throw InvalidArgument("backward: loss belongs to another tape");
  if (shape(loss.id) != Shape{1, 1}) {
    throw InvalidArgument("backward: loss must be scalar, got " + shape(loss.id).str());
  }
  for (Node& n : nodes_) n.grad.clear();
  if (nodes_[loss.id].requires_grad) {
    grad_buffer(loss.id)[0] = T(1);
    for (std::uint32_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
  }
  Gradients<T> out;
  if (store_ != nullptr) {
    out = zero_gradients(*store_);
    for (const auto& [index, id] : param_nodes_) {
      const Node& n = nodes_[id];
      if (!n.grad.empty()) out[index] = n.grad;
    }
  }
  return out;
}

template <typename T>
std::vector<T> Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return std::vector<T>(n.shape.size(), T(0));
  return n.grad;
}

// ---- ops ----

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& t = same_tape("matmul", a, b);
  const Shape sa = t.shape(a.id), sb = t.shape(b.id);
  if (sa.cols != sb.rows) mismatch("matmul", sa, sb);
  const Shape so{sa.rows, sb.cols};
  std::vector<T> out(so.size());
  MMap<T>(out.data(), so.rows, so.cols).noalias() = cmap(t, a.id) * cmap(t, b.id);
  const std::uint32_t ia = a.id, ib = b.id;
  const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
  return t.push(so, std::move(out), rg, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    auto dc = dmap(tp, self);
    if (tp.requires_grad(ia)) gmap(tp, ia).noalias() += dc * cmap(tp, ib).transpose();
    if (tp.requires_grad(ib)) gmap(tp, ib).noalias() += cmap(tp, ia).transpose() * dc;
  });
}

template <typename T>
Var<T> matmul_bt(Var<T> a, Var<T> b) {
  Tape<T>& t = same_tape("matmul_bt", a, b);
  const Shape sa = t.shape(a.id), sb = t.shape(b.id);
  if (sa.cols != sb.cols) mismatch("matmul_bt", sa, sb);
  const Shape so{sa.rows, sb.rows};
  std::vector<T> out(so.size());
  MMap<T>(out.data(), so.rows, so.cols).noalias() = cmap(t, a.id) * cmap(t, b.id).transpose();
  const std::uint32_t ia = a.id, ib = b.id;
  const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
  return t.push(so, std::move(out), rg, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    auto dc = dmap(tp, self);
    if (tp.requires_grad(ia)) gmap(tp, ia).noalias() += dc * cmap(tp, ib);
    if (tp.requires_grad(ib)) gmap(tp, ib).noalias() += dc.transpose() * cmap(tp, ia);
  });
}

namespace {

template <typename T, typename F>
Var<T> binary_same(const char* op, Var<T> a, Var<T> b, F f, T sign_b) {
  Tape<T>& t = same_tape(op, a, b);
  const Shape sa = t.shape(a.id), sb = t.shape(b.id);
  if (sa != sb) mismatch(op, sa, sb);
  const T* x = t.value(a.id);
  const T* y = t.value(b.id);
  std::vector<T> out(sa.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  const std::uint32_t ia = a.id, ib = b.id;
  const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
  return t.push(sa, std::move(out), rg, [ia, ib, sign_b](Tape<T>& tp, std::uint32_t self) {
    const T* dc = tp.grad_or_null(self);
    const std::size_t n = tp.shape(self).size();
    if (tp.requires_grad(ia)) {
      T* da = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < n; ++i) da[i] += dc[i];
    }
    if (tp.requires_grad(ib)) {
      T* db = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < n; ++i) db[i] += sign_b * dc[i];
    }
  });
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  return binary_same<T>("add", a, b, [](T x, T y) { return x + y; }, T(1));
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  return binary_same<T>("sub", a, b, [](T x, T y) { return x - y; }, T(-1));
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& t = same_tape("mul", a, b);
  const Shape sa = t.shape(a.id), sb = t.shape(b.id);
  if (sa != sb) mismatch("mul", sa, sb);
  const T* x = t.value(a.id);
  const T* y = t.value(b.id);
  std::vector<T> out(sa.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const std::uint32_t ia = a.id, ib = b.id;
  const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
  return t.push(sa, std::move(out), rg, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    const T* dc = tp.grad_or_null(self);
    const std::size_t n = tp.shape(self).size();
    if (tp.requires_grad(ia)) {
      T* da = tp.grad_buffer(ia);
      const T* yv = tp.value(ib);
      for (std::size_t i = 0; i < n; ++i) da[i] += dc[i] * yv[i];
    }
    if (tp.requires_grad(ib)) {
      T* db = tp.grad_buffer(ib);
      const T* xv = tp.value(ia);
      for (std::size_t i = 0; i < n; ++i) db[i] += dc[i] * xv[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return unary<T>(
      "scale", a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_bias(Var<T> a, Var<T> bias) {
  Tape<T>& t = same_tape("add_bias", a, bias);
  const Shape sa = t.shape(a.id), sb = t.shape(bias.id);
  if (sb.rows != 1 || sb.cols != sa.cols) mismatch("add_bias", sa, sb);
  std::vector<T> out(t.value(a.id), t.value(a.id) + sa.size());
  const T* b = t.value(bias.id);
  for (std::size_t r = 0; r < sa.rows; ++r) {
    for (std::size_t c = 0; c < sa.cols; ++c) out[r * sa.cols + c] += b[c];
  }
  const std::uint32_t ia = a.id, ib = bias.id;
  const bool rg = t.requires_grad(ia) || t.requires_grad(ib);
  return t.push(sa, std::move(out), rg, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    const Shape s = tp.shape(self);
    const T* dc = tp.grad_or_null(self);
    if (tp.requires_grad(ia)) {
      T* da = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < s.size(); ++i) da[i] += dc[i];
    }
    if (tp.requires_grad(ib)) {
      T* db = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::size_t c = 0; c < s.cols; ++c) db[c] += dc[r * s.cols + c];
      }
    }
  });
}

template <typename T>
Var<T> mul_col(Var<T> a, Var<T> col) {
  Tape<T>& t = same_tape("mul_col", a, col);
  const Shape sa = t.shape(a.id), sc = t.shape(col.id);
  if (sc.cols != 1 || sc.rows != sa.rows) mismatch("mul_col", sa, sc);
  const T* x = t.value(a.id);
  const T* w = t.value(col.id);
  std::vector<T> out(sa.size());
  for (std::size_t r = 0; r < sa.rows; ++r) {
    for (std::size_t c = 0; c < sa.cols; ++c) out[r * sa.cols + c] = x[r * sa.cols + c] * w[r];
  }
  const std::uint32_t ia = a.id, ic = col.id;
  const bool rg = t.requires_grad(ia) || t.requires_grad(ic);
  return t.push(sa, std::move(out), rg, [ia, ic](Tape<T>& tp, std::uint32_t self) {
    const Shape s = tp.shape(self);
    const T* dc = tp.grad_or_null(self);
    if (tp.requires_grad(ia)) {
      T* da = tp.grad_buffer(ia);
      const T* wv = tp.value(ic);
      for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::size_t c = 0; c < s.cols; ++c) da[r * s.cols + c] += dc[r * s.cols + c] * wv[r];
      }
    }
    if (tp.requires_grad(ic)) {
      T* dw = tp.grad_buffer(ic);
      const T* xv = tp.value(ia);
      for (std::size_t r = 0; r < s.rows; ++r) {
        T acc = 0;
        for (std::size_t c = 0; c < s.cols; ++c) acc += dc[r * s.cols + c] * xv[r * s.cols + c];
        dw[r] += acc;
      }
    }
  });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw InvalidArgument("ad::concat_cols: no inputs");
  Tape<T>& t = tape_of("concat_cols", parts[0]);
  const std::size_t rows = t.shape(parts[0].id).rows;
  std::size_t cols = 0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  for (const Var<T>& p : parts) {
    same_tape("concat_cols", parts[0], p);
    const Shape s = t.shape(p.id);
    if (s.rows != rows) mismatch("concat_cols", t.shape(parts[0].id), s);
    cols += s.cols;
    rg = rg || t.requires_grad(p.id);
    ids.push_back(p.id);
  }
  std::vector<T> out(rows * cols);
  std::size_t off = 0;
  for (std::uint32_t id : ids) {
    const Shape s = t.shape(id);
    const T* v = t.value(id);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v + r * s.cols, s.cols, out.data() + r * cols + off);
    }
    off += s.cols;
  }
  return t.push(Shape{rows, cols}, std::move(out), rg,
                [ids = std::move(ids)](Tape<T>& tp, std::uint32_t self) {
                  const Shape so = tp.shape(self);
                  const T* dc = tp.grad_or_null(self);
                  std::size_t o = 0;
                  for (std::uint32_t id : ids) {
                    const Shape s = tp.shape(id);
                    if (tp.requires_grad(id)) {
                      T* d = tp.grad_buffer(id);
                      for (std::size_t r = 0; r < so.rows; ++r) {
                        for (std::size_t c = 0; c < s.cols; ++c) {
                          d[r * s.cols + c] += dc[r * so.cols + o + c];
                        }
                      }
                    }
                    o += s.cols;
                  }
                });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw InvalidArgument("ad::concat_rows: no inputs");
  Tape<T>& t = tape_of("concat_rows", parts[0]);
  const std::size_t cols = t.shape(parts[0].id).cols;
  std::size_t rows = 0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  for (const Var<T>& p : parts) {
    same_tape("concat_rows", parts[0], p);
    const Shape s = t.shape(p.id);
    if (s.cols != cols) mismatch("concat_rows", t.shape(parts[0].id), s);
    rows += s.rows;
    rg = rg || t.requires_grad(p.id);
    ids.push_back(p.id);
  }
  std::vector<T> out;
  out.reserve(rows * cols);
  for (std::uint32_t id : ids) {
    const T* v = t.value(id);
    out.insert(out.end(), v, v + t.shape(id).size());
  }
  return t.push(Shape{rows, cols}, std::move(out), rg,
                [ids = std::move(ids)](Tape<T>& tp, std::uint32_t self) {
                  const T* dc = tp.grad_or_null(self);
                  std::size_t o = 0;
                  for (std::uint32_t id : ids) {
                    const std::size_t n = tp.shape(id).size();
                    if (tp.requires_grad(id)) {
                      T* d = tp.grad_buffer(id);
                      for (std::size_t i = 0; i < n; ++i) d[i] += dc[o + i];
                    }
                    o += n;
                  }
                });
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count) {
  Tape<T>& t = tape_of("slice_cols", a);
  const Shape sa = t.shape(a.id);
  if (count == 0 || begin + count > sa.cols) mismatch("slice_cols", sa, Shape{sa.rows, begin + count});
  const T* v = t.value(a.id);
  std::vector<T> out(sa.rows * count);
  for (std::size_t r = 0; r < sa.rows; ++r) std::copy_n(v + r * sa.cols + begin, count, out.data() + r * count);
  const std::uint32_t ia = a.id;
  return t.push(Shape{sa.rows, count}, std::move(out), t.requires_grad(ia),
                [ia, begin, count](Tape<T>& tp, std::uint32_t self) {
                  const Shape s = tp.shape(ia);
                  const T* dc = tp.grad_or_null(self);
                  T* d = tp.grad_buffer(ia);
                  for (std::size_t r = 0; r < s.rows; ++r) {
                    for (std::size_t c = 0; c < count; ++c) d[r * s.cols + begin + c] += dc[r * count + c];
                  }
                });
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t count) {
  Tape<T>& t = tape_of("slice_rows", a);
  const Shape sa = t.shape(a.id);
  if (count == 0 || begin + count > sa.rows) mismatch("slice_rows", sa, Shape{begin + count, sa.cols});
  const T* v = t.value(a.id) + begin * sa.cols;
  std::vector<T> out(v, v + count * sa.cols);
  const std::uint32_t ia = a.id;
  return t.push(Shape{count, sa.cols}, std::move(out), t.requires_grad(ia),
                [ia, begin](Tape<T>& tp, std::uint32_t self) {
                  const Shape so = tp.shape(self);
                  const T* dc = tp.grad_or_null(self);
                  T* d = tp.grad_buffer(ia) + begin * so.cols;
                  for (std::size_t i = 0; i < so.size(); ++i) d[i] += dc[i];
                });
}

template <typename T>
Var<T> embedding_gather(Var<T> table, std::span<const std::uint32_t> ids) {
  Tape<T>& t = tape_of("embedding_gather", table);
  const Shape st = t.shape(table.id);
  if (ids.empty()) throw InvalidArgument("ad::embedding_gather: no ids");
  const T* v = t.value(table.id);
  std::vector<T> out(ids.size() * st.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= st.rows) {
      throw InvalidArgument("ad::embedding_gather: id " + std::to_string(ids[i]) +
                            " out of range for table " + st.str());
    }
    std::copy_n(v + ids[i] * st.cols, st.cols, out.data() + i * st.cols);
  }
  const std::uint32_t it = table.id;
  return t.push(Shape{ids.size(), st.cols}, std::move(out), t.requires_grad(it),
                [it, rows = std::vector<std::uint32_t>(ids.begin(), ids.end())](
                    Tape<T>& tp, std::uint32_t self) {
                  const std::size_t cols = tp.shape(it).cols;
                  const T* dc = tp.grad_or_null(self);
                  T* d = tp.grad_buffer(it);
                  for (std::size_t i = 0; i < rows.size(); ++i) {
                    T* row = d + rows[i] * cols;
                    for (std::size_t c = 0; c < cols; ++c) row[c] += dc[i * cols + c];
                  }
                });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary<T>(
      "sigmoid", a,
      [](T x) {
        if (x >= 0) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return unary<T>(
      "tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> relu(Var<T> a) {
  return unary<T>(
      "relu", a, [](T x) { return x > 0 ? x : T(0); }, [](T x, T) { return x > 0 ? T(1) : T(0); });
}

template <typename T>
Var<T> log(Var<T> a) {
  return unary<T>(
      "log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> softmax(Var<T> a) {
  Tape<T>& t = tape_of("softmax", a);
  const Shape s = t.shape(a.id);
  const T* x = t.value(a.id);
  std::vector<T> out(s.size());
  for (std::size_t r = 0; r < s.rows; ++r) {
    const T* xr = x + r * s.cols;
    T* yr = out.data() + r * s.cols;
    const T m = *std::max_element(xr, xr + s.cols);
    T z = 0;
    for (std::size_t c = 0; c < s.cols; ++c) z += (yr[c] = std::exp(xr[c] - m));
    for (std::size_t c = 0; c < s.cols; ++c) yr[c] /= z;
  }
  const std::uint32_t ia = a.id;
  return t.push(s, std::move(out), t.requires_grad(ia), [ia](Tape<T>& tp, std::uint32_t self) {
    const Shape sh = tp.shape(self);
    const T* y = tp.value(self);
    const T* dy = tp.grad_or_null(self);
    T* dx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < sh.rows; ++r) {
      const std::size_t o = r * sh.cols;
      T dot = 0;
      for (std::size_t c = 0; c < sh.cols; ++c) dot += dy[o + c] * y[o + c];
      for (std::size_t c = 0; c < sh.cols; ++c) dx[o + c] += y[o + c] * (dy[o + c] - dot);
    }
  });
}

template <typename T>
Var<T> log_softmax(Var<T> a) {
  Tape<T>& t = tape_of("log_softmax", a);
  const Shape s = t.shape(a.id);
  const T* x = t.value(a.id);
  std::vector<T> out(s.size());
  for (std::size_t r = 0; r < s.rows; ++r) {
    const T* xr = x + r * s.cols;
    T* yr = out.data() + r * s.cols;
    const T m = *std::max_element(xr, xr + s.cols);
    T z = 0;
    for (std::size_t c = 0; c < s.cols; ++c) z += std::exp(xr[c] - m);
    const T lz = m + std::log(z);
    for (std::size_t c = 0; c < s.cols; ++c) yr[c] = xr[c] - lz;
  }
  const std::uint32_t ia = a.id;
  return t.push(s, std::move(out), t.requires_grad(ia), [ia](Tape<T>& tp, std::uint32_t self) {
    const Shape sh = tp.shape(self);
    const T* y = tp.value(self);
    const T* dy = tp.grad_or_null(self);
    T* dx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < sh.rows; ++r) {
      const std::size_t o = r * sh.cols;
      T total = 0;
      for (std::size_t c = 0; c < sh.cols; ++c) total += dy[o + c];
      for (std::size_t c = 0; c < sh.cols; ++c) dx[o + c] += dy[o + c] - std::exp(y[o + c]) * total;
    }
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& t = tape_of("sum", a);
  const Shape s = t.shape(a.id);
  const T* x = t.value(a.id);
  T acc = 0;
  for (std::size_t i = 0; i < s.size(); ++i) acc += x[i];
  const std::uint32_t ia = a.id;
  return t.push(Shape{1, 1}, {acc}, t.requires_grad(ia), [ia](Tape<T>& tp, std::uint32_t self) {
    const T g = tp.grad_or_null(self)[0];
    T* dx = tp.grad_buffer(ia);
    const std::size_t n = tp.shape(ia).size();
    for (std::size_t i = 0; i < n; ++i) dx[i] += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const std::size_t n = tape_of("mean", a).shape(a.id).size();
  return scale(sum(a), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> row_sum(Var<T> a) {
  Tape<T>& t = tape_of("row_sum", a);
  const Shape s = t.shape(a.id);
  const T* x = t.value(a.id);
  std::vector<T> out(s.rows, T(0));
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) out[r] += x[r * s.cols + c];
  }
  const std::uint32_t ia = a.id;
  return t.push(Shape{s.rows, 1}, std::move(out), t.requires_grad(ia),
                [ia](Tape<T>& tp, std::uint32_t self) {
                  const Shape sh = tp.shape(ia);
                  const T* dc = tp.grad_or_null(self);
                  T* dx = tp.grad_buffer(ia);
                  for (std::size_t r = 0; r < sh.rows; ++r) {
                    for (std::size_t c = 0; c < sh.cols; ++c) dx[r * sh.cols + c] += dc[r];
                  }
                });
}

template <typename T>
Var<T> pick(Var<T> a, std::span<const std::uint32_t> cols) {
  Tape<T>& t = tape_of("pick", a);
  const Shape s = t.shape(a.id);
  if (cols.size() != s.rows) mismatch("pick", s, Shape{cols.size(), 1});
  const T* x = t.value(a.id);
  std::vector<T> out(s.rows);
  for (std::size_t r = 0; r < s.rows; ++r) {
    if (cols[r] >= s.cols) throw InvalidArgument("ad::pick: column out of range for " + s.str());
    out[r] = x[r * s.cols + cols[r]];
  }
  const std::uint32_t ia = a.id;
  return t.push(Shape{s.rows, 1}, std::move(out), t.requires_grad(ia),
                [ia, idx = std::vector<std::uint32_t>(cols.begin(), cols.end())](
                    Tape<T>& tp, std::uint32_t self) {
                  const std::size_t c = tp.shape(ia).cols;
                  const T* dc = tp.grad_or_null(self);
                  T* dx = tp.grad_buffer(ia);
                  for (std::size_t r = 0; r < idx.size(); ++r) dx[r * c + idx[r]] += dc[r];
                });
}

// ---- optimization ----

template <typename T>
double global_norm(const Gradients<T>& grads) {
  double s = 0;
  for (const auto& g : grads) {
    for (T v : g) s += static_cast<double>(v) * static_cast<double>(v);
  }
  return std::sqrt(s);
}

template <typename T>
double clip_global_norm(Gradients<T>& grads, double max_norm) {
  if (!(max_norm > 0)) throw InvalidArgument("clip_global_norm: max_norm must be > 0");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const T f = static_cast<T>(max_norm / norm);
    for (auto& g : grads) {
      for (T& v : g) v *= f;
    }
  }
  return norm;
}

template <typename T>
void adagrad_step(ParamStore<T>& store, const Gradients<T>& grads, AdagradState<T>& state) {
  if (grads.size() != store.size()) throw InvalidArgument("adagrad_step: gradient count mismatch");
  if (state.accumulators.empty()) {
    state.accumulators.resize(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
      state.accumulators[i].assign(store.at(i).value.size(), T(0));
    }
  }
  if (state.accumulators.size() != store.size()) {
    throw InvalidArgument("adagrad_step: optimizer state does not match the store");
  }
  const T lr = static_cast<T>(state.learning_rate);
  const T eps = static_cast<T>(state.epsilon);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store.at(i).value;
    auto& acc = state.accumulators[i];
    const auto& g = grads[i];
    if (g.size() != p.size() || acc.size() != p.size()) {
      throw InvalidArgument("adagrad_step: shape mismatch for '" + store.at(i).name + "'");
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (g[k] == T(0)) continue;
      acc[k] += g[k] * g[k];
      p[k] -= lr * g[k] / (std::sqrt(acc[k]) + eps);
    }
  }
}

#define MCFORGE_AD_INSTANTIATE(T)                                                       \
  template class ParamStore<T>;                                                         \
  template struct Var<T>;                                                               \
  template class Tape<T>;                                                               \
  template Gradients<T> zero_gradients(const ParamStore<T>&);                           \
  template void accumulate(Gradients<T>&, const Gradients<T>&);                         \
  template Var<T> matmul(Var<T>, Var<T>);                                               \
  template Var<T> matmul_bt(Var<T>, Var<T>);                                            \
  template Var<T> add(Var<T>, Var<T>);                                                  \
  template Var<T> sub(Var<T>, Var<T>);                                                  \
  template Var<T> mul(Var<T>, Var<T>);                                                  \
  template Var<T> scale(Var<T>, T);                                                     \
  template Var<T> add_bias(Var<T>, Var<T>);                                             \
  template Var<T> mul_col(Var<T>, Var<T>);                                              \
  template Var<T> concat_cols(std::span<const Var<T>>);                                 \
  template Var<T> concat_rows(std::span<const Var<T>>);                                 \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                         \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                         \
  template Var<T> embedding_gather(Var<T>, std::span<const std::uint32_t>);             \
  template Var<T> sigmoid(Var<T>);                                                      \
  template Var<T> tanh(Var<T>);                                                         \
  template Var<T> relu(Var<T>);                                                         \
  template Var<T> softmax(Var<T>);                                                      \
  template Var<T> log_softmax(Var<T>);                                                  \
  template Var<T> log(Var<T>);                                                          \
  template Var<T> sum(Var<T>);                                                          \
  template Var<T> mean(Var<T>);                                                         \
  template Var<T> row_sum(Var<T>);                                                      \
  template Var<T> pick(Var<T>, std::span<const std::uint32_t>);                         \
  template double global_norm(const Gradients<T>&);                                     \
  template double clip_global_norm(Gradients<T>&, double);                              \
  template void adagrad_step(ParamStore<T>&, const Gradients<T>&, AdagradState<T>&);

MCFORGE_AD_INSTANTIATE(float)
MCFORGE_AD_INSTANTIATE(double)

#undef MCFORGE_AD_INSTANTIATE

}  // namespace mcforge::ad
