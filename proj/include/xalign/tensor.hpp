// Copyright 2026 The XAlign Authors.
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

#ifndef XALIGN_TENSOR_HPP_
#define XALIGN_TENSOR_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xalign {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Dense row-major float64 array. Rank 0 is a scalar.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // 2-D element access.
  double at(std::size_t row, std::size_t col) const;
  double& at(std::size_t row, std::size_t col);

  // Value of a single-element tensor.
  double item() const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

using NodeId = std::size_t;

enum class OpKind {
  kLeaf,
  kMatmul,
  kAdd,
  kMul,
  kScale,
  kRelu,
  kTanh,
  kSigmoid,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kReshape,
  kTranspose2d,
  kSliceRows,
  kConcatRows,
  kGatherRows,
  kSum,
  kMean,
  kL2NormalizeRows,
  kCrossEntropy,
  kBinaryCrossEntropy,
  kMse,
};

const char* op_name(OpKind kind);

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  NodeId id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

// Gradients of one backward sweep, keyed by node id.
class Gradients {
 public:
  // Zero tensor of the node's shape when the node received no gradient.
  Tensor of(const Var& v) const;
  bool has(const Var& v) const { return grads_.count(v.id()) != 0; }
  const std::map<NodeId, Tensor>& all() const { return grads_; }

 private:
  friend class Graph;
  std::map<NodeId, Tensor> grads_;
  std::map<NodeId, Shape> shapes_;
};

// Dynamic tape. Nodes are appended in evaluation order, so creation order is
// a topological order. One graph per forward/backward pass, single-threaded.
class Graph {
 public:
  struct BackwardArgs {
    const Tensor& out_value;
    const Tensor& out_grad;
    std::span<const Tensor* const> in_values;
    // Null for inputs that do not require grad.
    std::span<Tensor* const> in_grads;
  };
  // Accumulates (+=) into the input gradients.
  using BackwardFn = std::function<void(const BackwardArgs&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  Gradients backward(const Var& root);

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }

 private:
  friend class Var;

  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    bool requires_grad;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

// Primitives. Inputs must belong to the same graph.

// [M x K] x [K x N] -> [M x N]
Var matmul(const Var& a, const Var& b);
// Elementwise sum. `b` may also be a length-C vector (or 1 x C) broadcast
// over the rows of a 2-D `a` with C columns.
Var add(const Var& a, const Var& b);
// Elementwise (Hadamard) product of equal shapes.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
// Row-wise over the last axis.
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var reshape(const Var& a, Shape shape);
Var transpose2d(const Var& a);
// Rows [begin, begin + count) of a 2-D tensor.
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var concat_rows(const std::vector<Var>& parts);
// Row i of the result is row indices[i] of `a`.
Var gather_rows(const Var& a, std::vector<std::size_t> indices);
Var sum(const Var& a);
Var mean(const Var& a);
Var l2_normalize_rows(const Var& a);

inline constexpr int kNoIgnore = -1000000;

// Mean over non-ignored rows of -log softmax(logits)[target].
Var loss_cross_entropy(const Var& logits, std::span<const int> targets,
                       int ignore_index = kNoIgnore);
// Mean over all elements, stable softplus form. Targets are {0, 1}.
Var loss_binary_cross_entropy(const Var& logits, const Tensor& targets);
Var loss_mse(const Var& a, const Var& b);
// Entry (i, k) is cos(A_i, B_k).
Var cosine_similarity_matrix(const Var& a, const Var& b);

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::size_t worst_index = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

using ScalarFn = std::function<Var(const Var&)>;

// Central-difference check of the gradient of f at x.
GradCheckReport gradient_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5,
                               double tol = 1e-4);

}  // namespace xalign

#endif  // XALIGN_TENSOR_HPP_
