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


#pragma once

// Reverse-mode differentiation over dense row-major matrices. Every value is a
// 2-D matrix; scalars are 1x1. Instantiated for float (training) and double
// (gradient checking).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mcforge::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  std::string str() const;
  bool operator==(const Shape&) const = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
};

/// Named parameters in registration order. Storage addresses are stable for
/// the lifetime of the store.
template <typename T>
class ParamStore {
 public:
  std::size_t add(std::string name, Shape shape);

  std::size_t size() const { return params_.size(); }
  Parameter<T>& at(std::size_t i) { return *params_[i]; }
  const Parameter<T>& at(std::size_t i) const { return *params_[i]; }
  Parameter<T>& at(std::string_view name) { return *params_[index_of(name)]; }
  const Parameter<T>& at(std::string_view name) const { return *params_[index_of(name)]; }

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  /// Total number of scalars across all parameters.
  std::size_t num_scalars() const;

  ParamStore clone() const;

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Dense gradients aligned with a ParamStore: entry i belongs to parameter i.
template <typename T>
using Gradients = std::vector<std::vector<T>>;

template <typename T>
Gradients<T> zero_gradients(const ParamStore<T>& store);

/// out += in, in parameter order.
template <typename T>
void accumulate(Gradients<T>& out, const Gradients<T>& in);

template <typename T>
class Tape;

/// Handle to a node on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  Shape shape() const;
  std::span<const T> value() const;
  /// Value of a 1x1 node.
  T item() const;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::uint32_t self)>;

  explicit Tape(const ParamStore<T>* store = nullptr) : store_(store) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf reading parameter storage in place. Repeated calls for the same
  /// parameter return the same node.
  Var<T> param(std::size_t index);
  Var<T> param(std::string_view name);

  Var<T> constant(Shape shape, std::vector<T> value);
  /// Leaf whose gradient is kept and readable through `grad`.
  Var<T> variable(Shape shape, std::vector<T> value);

  /// Runs the backward pass from a 1x1 loss and returns gradients for every
  /// parameter of the store (zeros for parameters the loss does not use).
  Gradients<T> backward(Var<T> loss);

  /// Gradient of a node after `backward`; zeros if none reached it.
  std::vector<T> grad(Var<T> v) const;

  std::size_t size() const { return nodes_.size(); }

  // Op plumbing.
  Shape shape(std::uint32_t id) const { return nodes_[id].shape; }
  const T* value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated on first use.
  T* grad_buffer(std::uint32_t id);
  const T* grad_or_null(std::uint32_t id) const;
  Var<T> push(Shape shape, std::vector<T> value, bool requires_grad, Backward backward);

 private:
  struct Node {
    Shape shape;
    std::vector<T> own;
    const T* external = nullptr;
    std::vector<T> grad;
    bool requires_grad = false;
    std::int64_t param = -1;
    Backward backward;
  };

  const ParamStore<T>* store_;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, std::uint32_t> param_nodes_;
};

// Ops. Shapes must agree exactly; the only broadcasts are `add_bias` (a 1xN
// row added to each row) and `mul_col` (each row scaled by an Mx1 column).

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// a * b^T without materializing the transpose.
template <typename T> Var<T> matmul_bt(Var<T> a, Var<T> b);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> add_bias(Var<T> a, Var<T> bias);
template <typename T> Var<T> mul_col(Var<T> a, Var<T> col);
/// Side-by-side concatenation; all parts share the row count.
template <typename T> Var<T> concat_cols(std::span<const Var<T>> parts);
/// Stacked concatenation; all parts share the column count.
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);
template <typename T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count);
template <typename T> Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t count);
/// Rows of `table` selected by `ids`, in order.
template <typename T> Var<T> embedding_gather(Var<T> table, std::span<const std::uint32_t> ids);
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> tanh(Var<T> a);
template <typename T> Var<T> relu(Var<T> a);
/// Row-wise softmax.
template <typename T> Var<T> softmax(Var<T> a);
/// Row-wise log-softmax, computed stably.
template <typename T> Var<T> log_softmax(Var<T> a);
template <typename T> Var<T> log(Var<T> a);
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
/// Per-row sums, Mx1.
template <typename T> Var<T> row_sum(Var<T> a);
/// Element (r, cols[r]) of each row, Mx1.
template <typename T> Var<T> pick(Var<T> a, std::span<const std::uint32_t> cols);

template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

/// Global L2 norm over all gradients.
template <typename T>
double global_norm(const Gradients<T>& grads);

/// Scales all gradients by max_norm / norm when the global norm exceeds
/// max_norm. Returns the norm before clipping.
template <typename T>
double clip_global_norm(Gradients<T>& grads, double max_norm);

template <typename T>
struct AdagradState {
  double learning_rate = 0.01;
  double epsilon = 1e-8;
  std::vector<std::vector<T>> accumulators;
};

/// acc += g^2; p -= lr * g / (sqrt(acc) + eps).
template <typename T>
void adagrad_step(ParamStore<T>& store, const Gradients<T>& grads, AdagradState<T>& state);

}  // namespace mcforge::ad
