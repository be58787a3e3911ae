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

#include "xalign/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace xalign {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

[[noreturn]] void shape_mismatch(const char* op, const std::string& expected,
                                 const Shape& actual) {
  throw ShapeError(std::string(op) + ": expected " + expected + ", got " +
                   shape_str(actual));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) shape_mismatch(op, "a 2-D tensor", t.shape());
}

Graph& graph_of(const Var& v) {
  if (!v.valid()) throw GraphError("operation on an unbound Var");
  return *v.graph();
}

Graph& common_graph(const Var& a, const Var& b) {
  if (a.graph() != b.graph()) throw GraphError("inputs belong to different graphs");
  return graph_of(a);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Row-wise max-shifted softmax of the last axis into `out`.
void softmax_into(const Tensor& in, std::vector<double>& out, std::size_t cols) {
  const auto x = in.data();
  out.resize(x.size());
  for (std::size_t r = 0; r * cols < x.size(); ++r) {
    const double* row = x.data() + r * cols;
    double* o = out.data() + r * cols;
    const double m = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(row[c] - m);
      z += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
}

std::size_t last_dim(const char* op, const Tensor& t) {
  if (t.rank() == 0 || t.numel() == 0) shape_mismatch(op, "rank >= 1", t.shape());
  return t.shape().back();
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_str(shape_) + " needs " +
                     std::to_string(shape_numel(shape_)) + " elements, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return data_[row * shape_[1] + col];
}

double& Tensor::at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }

double Tensor::item() const {
  if (data_.size() != 1) shape_mismatch("item", "a single element", shape_);
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Graph

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kLogSoftmaxRows: return "log_softmax_rows";
    case OpKind::kReshape: return "reshape";
    case OpKind::kTranspose2d: return "transpose2d";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kL2NormalizeRows: return "l2_normalize_rows";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kBinaryCrossEntropy: return "binary_cross_entropy";
    case OpKind::kMse: return "mse";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (!graph_) throw GraphError("value() on an unbound Var");
  return graph_->nodes_.at(id_).value;
}

bool Var::requires_grad() const {
  if (!graph_) throw GraphError("requires_grad() on an unbound Var");
  return graph_->nodes_.at(id_).requires_grad;
}

Tensor Gradients::of(const Var& v) const {
  if (auto it = grads_.find(v.id()); it != grads_.end()) return it->second;
  if (auto it = shapes_.find(v.id()); it != shapes_.end()) return Tensor::zeros(it->second);
  return Tensor::zeros(v.shape());
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{OpKind::kLeaf, {}, std::move(value), requires_grad, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  bool needs_grad = false;
  std::vector<NodeId> ids;
  ids.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.graph() != this) throw GraphError("input belongs to a different graph");
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
    ids.push_back(in.id());
  }
  nodes_.push_back(Node{kind, std::move(ids), std::move(value), needs_grad,
                        needs_grad ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(const Var& root) {
  if (root.graph() != this || root.id() >= nodes_.size()) {
    throw GraphError("backward root is not part of this graph");
  }
  const Node& top = nodes_[root.id()];
  if (top.value.numel() != 1) {
    throw ShapeError("backward root must be a scalar, got " + shape_str(top.value.shape()));
  }

  std::vector<std::unique_ptr<Tensor>> grads(root.id() + 1);
  grads[root.id()] = std::make_unique<Tensor>(Tensor::filled(top.value.shape(), 1.0));

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (NodeId id = root.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!grads[id] || !node.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (NodeId in : node.inputs) {
      in_values.push_back(&nodes_[in].value);
      if (nodes_[in].requires_grad) {
        if (!grads[in]) grads[in] = std::make_unique<Tensor>(Tensor::zeros(nodes_[in].value.shape()));
        in_grads.push_back(grads[in].get());
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardArgs{node.value, *grads[id], in_values, in_grads});
  }

  Gradients out;
  for (NodeId id = 0; id <= root.id(); ++id) {
    if (nodes_[id].kind == OpKind::kLeaf && nodes_[id].requires_grad) {
      out.shapes_[id] = nodes_[id].value.shape();
    }
    if (grads[id]) out.grads_[id] = std::move(*grads[id]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

Var matmul(const Var& a, const Var& b) {
  Graph& g = common_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank2("matmul", x);
  require_rank2("matmul", y);
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  if (y.dim(0) != k) {
    shape_mismatch("matmul", "rhs with " + std::to_string(k) + " rows", y.shape());
  }
  std::vector<double> out(m * n, 0.0);
  const double* xp = x.data().data();
  const double* yp = y.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = xp[i * k + p];
      if (s == 0.0) continue;
      const double* yr = yp + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += s * yr[j];
    }
  }
  return g.record(OpKind::kMatmul, {a, b}, Tensor({m, n}, std::move(out)),
                  [m, k, n](const Graph::BackwardArgs& args) {
                    const double* gp = args.out_grad.data().data();
                    const double* xp = args.in_values[0]->data().data();
                    const double* yp = args.in_values[1]->data().data();
                    if (Tensor* gx = args.in_grads[0]) {
                      double* d = gx->data().data();
                      for (std::size_t i = 0; i < m; ++i) {
                        const double* gr = gp + i * n;
                        for (std::size_t p = 0; p < k; ++p) {
                          const double* yr = yp + p * n;
                          double acc = 0.0;
                          for (std::size_t j = 0; j < n; ++j) acc += gr[j] * yr[j];
                          d[i * k + p] += acc;
                        }
                      }
                    }
                    if (Tensor* gy = args.in_grads[1]) {
                      double* d = gy->data().data();
                      for (std::size_t i = 0; i < m; ++i) {
                        const double* gr = gp + i * n;
                        for (std::size_t p = 0; p < k; ++p) {
                          const double s = xp[i * k + p];
                          if (s == 0.0) continue;
                          double* dr = d + p * n;
                          for (std::size_t j = 0; j < n; ++j) dr[j] += s * gr[j];
                        }
                      }
                    }
                  });
}

Var add(const Var& a, const Var& b) {
  Graph& g = common_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() == y.shape()) {
    std::vector<double> out(x.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
    return g.record(OpKind::kAdd, {a, b}, Tensor(x.shape(), std::move(out)),
                    [](const Graph::BackwardArgs& args) {
                      const auto gd = args.out_grad.data();
                      for (Tensor* gi : args.in_grads) {
                        if (!gi) continue;
                        auto d = gi->data();
                        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i];
                      }
                    });
  }
  const bool row_vector = (y.rank() == 1) || (y.rank() == 2 && y.dim(0) == 1);
  if (x.rank() != 2 || !row_vector || y.numel() != x.dim(1)) {
    shape_mismatch("add", shape_str(x.shape()) + " or a row vector of length " +
                              (x.rank() == 2 ? std::to_string(x.dim(1)) : std::string("?")),
                   y.shape());
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(x.values());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += y[c];
  }
  return g.record(OpKind::kAdd, {a, b}, Tensor(x.shape(), std::move(out)),
                  [rows, cols](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    if (Tensor* gx = args.in_grads[0]) {
                      auto d = gx->data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i];
                    }
                    if (Tensor* gy = args.in_grads[1]) {
                      auto d = gy->data();
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < cols; ++c) d[c] += gd[r * cols + c];
                      }
                    }
                  });
}

Var mul(const Var& a, const Var& b) {
  Graph& g = common_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_mismatch("mul", shape_str(x.shape()), y.shape());
  std::vector<double> out(x.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return g.record(OpKind::kMul, {a, b}, Tensor(x.shape(), std::move(out)),
                  [](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    const auto xv = args.in_values[0]->data();
                    const auto yv = args.in_values[1]->data();
                    if (Tensor* gx = args.in_grads[0]) {
                      auto d = gx->data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * yv[i];
                    }
                    if (Tensor* gy = args.in_grads[1]) {
                      auto d = gy->data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * xv[i];
                    }
                  });
}

Var scale(const Var& a, double factor) {
  Graph& g = graph_of(a);
  std::vector<double> out(a.value().values());
  for (double& v : out) v *= factor;
  return g.record(OpKind::kScale, {a}, Tensor(a.shape(), std::move(out)),
                  [factor](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * gd[i];
                  });
}

namespace {

// Elementwise unary op whose derivative is a function of the output value.
template <typename Fwd, typename DerivFromOut>
Var unary(OpKind kind, const Var& a, Fwd fwd, DerivFromOut deriv) {
  Graph& g = graph_of(a);
  std::vector<double> out(a.value().values());
  for (double& v : out) v = fwd(v);
  return g.record(kind, {a}, Tensor(a.shape(), std::move(out)),
                  [deriv](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    const auto y = args.out_value.data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * deriv(y[i]);
                  });
}

}  // namespace

Var relu(const Var& a) {
  return unary(
      OpKind::kRelu, a, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& a) {
  return unary(
      OpKind::kTanh, a, [](double v) { return std::tanh(v); },
      [](double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      OpKind::kSigmoid, a,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var softmax_rows(const Var& a) {
  Graph& g = graph_of(a);
  const std::size_t cols = last_dim("softmax_rows", a.value());
  std::vector<double> out;
  softmax_into(a.value(), out, cols);
  return g.record(OpKind::kSoftmaxRows, {a}, Tensor(a.shape(), std::move(out)),
                  [cols](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    const auto y = args.out_value.data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t r = 0; r * cols < y.size(); ++r) {
                      const std::size_t o = r * cols;
                      double dot = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) dot += gd[o + c] * y[o + c];
                      for (std::size_t c = 0; c < cols; ++c) d[o + c] += y[o + c] * (gd[o + c] - dot);
                    }
                  });
}

Var log_softmax_rows(const Var& a) {
  Graph& g = graph_of(a);
  const std::size_t cols = last_dim("log_softmax_rows", a.value());
  const auto x = a.value().data();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r * cols < x.size(); ++r) {
    const double* row = x.data() + r * cols;
    const double m = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(row[c] - m);
    const double lse = m + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = row[c] - lse;
  }
  return g.record(OpKind::kLogSoftmaxRows, {a}, Tensor(a.shape(), std::move(out)),
                  [cols](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    const auto y = args.out_value.data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t r = 0; r * cols < y.size(); ++r) {
                      const std::size_t o = r * cols;
                      double total = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) total += gd[o + c];
                      for (std::size_t c = 0; c < cols; ++c) {
                        d[o + c] += gd[o + c] - std::exp(y[o + c]) * total;
                      }
                    }
                  });
}

Var reshape(const Var& a, Shape shape) {
  Graph& g = graph_of(a);
  if (shape_numel(shape) != a.value().numel()) {
    shape_mismatch("reshape", std::to_string(a.value().numel()) + " elements", shape);
  }
  return g.record(OpKind::kReshape, {a}, Tensor(std::move(shape), a.value().values()),
                  [](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i];
                  });
}

Var transpose2d(const Var& a) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2("transpose2d", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  }
  return g.record(OpKind::kTranspose2d, {a}, Tensor({c, r}, std::move(out)),
                  [r, c](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t i = 0; i < r; ++i) {
                      for (std::size_t j = 0; j < c; ++j) d[i * c + j] += gd[j * r + i];
                    }
                  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2("slice_rows", x);
  if (count == 0 || begin + count > x.dim(0)) {
    throw IndexError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t cols = x.dim(1);
  const auto src = x.data().subspan(begin * cols, count * cols);
  return g.record(OpKind::kSliceRows, {a},
                  Tensor({count, cols}, std::vector<double>(src.begin(), src.end())),
                  [begin, cols](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    auto d = args.in_grads[0]->data().subspan(begin * cols, gd.size());
                    for (std::size_t i = 0; i < gd.size(); ++i) d[i] += gd[i];
                  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Graph& g = graph_of(parts.front());
  const Tensor& first = parts.front().value();
  require_rank2("concat_rows", first);
  const std::size_t cols = first.dim(1);
  std::size_t rows = 0;
  std::vector<double> out;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    if (t.rank() != 2 || t.dim(1) != cols) {
      shape_mismatch("concat_rows", "[? x " + std::to_string(cols) + "]", t.shape());
    }
    rows += t.dim(0);
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return g.record(OpKind::kConcatRows, parts, Tensor({rows, cols}, std::move(out)),
                  [](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    std::size_t offset = 0;
                    for (std::size_t p = 0; p < args.in_values.size(); ++p) {
                      const std::size_t n = args.in_values[p]->numel();
                      if (Tensor* gi = args.in_grads[p]) {
                        auto d = gi->data();
                        for (std::size_t i = 0; i < n; ++i) d[i] += gd[offset + i];
                      }
                      offset += n;
                    }
                  });
}

Var gather_rows(const Var& a, std::vector<std::size_t> indices) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2("gather_rows", x);
  if (indices.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t cols = x.dim(1);
  std::vector<double> out;
  out.reserve(indices.size() * cols);
  for (std::size_t idx : indices) {
    if (idx >= x.dim(0)) {
      throw IndexError("gather_rows: index " + std::to_string(idx) + " outside " +
                       std::to_string(x.dim(0)) + " rows");
    }
    const auto row = x.data().subspan(idx * cols, cols);
    out.insert(out.end(), row.begin(), row.end());
  }
  const std::size_t n = indices.size();
  return g.record(OpKind::kGatherRows, {a}, Tensor({n, cols}, std::move(out)),
                  [indices = std::move(indices), cols](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t i = 0; i < indices.size(); ++i) {
                      double* dst = d.data() + indices[i] * cols;
                      const double* src = gd.data() + i * cols;
                      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                    }
                  });
}

Var sum(const Var& a) {
  Graph& g = graph_of(a);
  const auto x = a.value().data();
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  return g.record(OpKind::kSum, {a}, Tensor::scalar(total), [](const Graph::BackwardArgs& args) {
    const double gd = args.out_grad[0];
    for (double& v : args.in_grads[0]->data()) v += gd;
  });
}

Var mean(const Var& a) {
  Graph& g = graph_of(a);
  const auto x = a.value().data();
  const double n = static_cast<double>(x.size());
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  return g.record(OpKind::kMean, {a}, Tensor::scalar(total / n),
                  [n](const Graph::BackwardArgs& args) {
                    const double gd = args.out_grad[0] / n;
                    for (double& v : args.in_grads[0]->data()) v += gd;
                  });
}

Var l2_normalize_rows(const Var& a) {
  constexpr double kMinNorm = 1e-12;
  Graph& g = graph_of(a);
  const std::size_t cols = last_dim("l2_normalize_rows", a.value());
  const auto x = a.value().data();
  const std::size_t rows = x.size() / cols;
  std::vector<double> out(x.size(), 0.0);
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) ss += x[r * cols + c] * x[r * cols + c];
    norms[r] = std::sqrt(ss);
    if (norms[r] < kMinNorm) continue;
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] / norms[r];
  }
  return g.record(OpKind::kL2NormalizeRows, {a}, Tensor(a.shape(), std::move(out)),
                  [cols, norms = std::move(norms)](const Graph::BackwardArgs& args) {
                    const auto gd = args.out_grad.data();
                    const auto y = args.out_value.data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t r = 0; r < norms.size(); ++r) {
                      if (norms[r] < kMinNorm) continue;
                      const std::size_t o = r * cols;
                      double dot = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) dot += y[o + c] * gd[o + c];
                      for (std::size_t c = 0; c < cols; ++c) {
                        d[o + c] += (gd[o + c] - y[o + c] * dot) / norms[r];
                      }
                    }
                  });
}

// ---------------------------------------------------------------------------
// Losses

Var loss_cross_entropy(const Var& logits, std::span<const int> targets, int ignore_index) {
  Graph& g = graph_of(logits);
  const Tensor& z = logits.value();
  require_rank2("loss_cross_entropy", z);
  const std::size_t n = z.dim(0), k = z.dim(1);
  if (targets.size() != n) {
    throw ShapeError("loss_cross_entropy: " + std::to_string(n) + " rows but " +
                     std::to_string(targets.size()) + " targets");
  }
  std::vector<double> probs;
  softmax_into(z, probs, k);
  std::vector<int> kept(targets.begin(), targets.end());
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int t = targets[i];
    if (t == ignore_index) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= k) {
      throw IndexError("loss_cross_entropy: target " + std::to_string(t) + " outside [0, " +
                       std::to_string(k) + ")");
    }
    const double* row = z.data().data() + i * k;
    const double m = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(row[c] - m);
    total += m + std::log(s) - row[t];
    ++count;
  }
  if (count == 0) throw std::invalid_argument("loss_cross_entropy: every row is ignored");
  const double denom = static_cast<double>(count);
  return g.record(OpKind::kCrossEntropy, {logits}, Tensor::scalar(total / denom),
                  [probs = std::move(probs), kept = std::move(kept), k, denom,
                   ignore_index](const Graph::BackwardArgs& args) {
                    const double gd = args.out_grad[0] / denom;
                    auto d = args.in_grads[0]->data();
                    for (std::size_t i = 0; i < kept.size(); ++i) {
                      if (kept[i] == ignore_index) continue;
                      for (std::size_t c = 0; c < k; ++c) d[i * k + c] += gd * probs[i * k + c];
                      d[i * k + static_cast<std::size_t>(kept[i])] -= gd;
                    }
                  });
}

Var loss_binary_cross_entropy(const Var& logits, const Tensor& targets) {
  Graph& g = graph_of(logits);
  const Tensor& z = logits.value();
  if (z.shape() != targets.shape()) {
    shape_mismatch("loss_binary_cross_entropy", shape_str(z.shape()), targets.shape());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < z.numel(); ++i) {
    const double t = targets[i];
    if (t != 0.0 && t != 1.0) {
      throw std::invalid_argument("loss_binary_cross_entropy: targets must be 0 or 1");
    }
    total += softplus(z[i]) - t * z[i];
  }
  const double n = static_cast<double>(z.numel());
  return g.record(OpKind::kBinaryCrossEntropy, {logits}, Tensor::scalar(total / n),
                  [t = targets, n](const Graph::BackwardArgs& args) {
                    const double gd = args.out_grad[0] / n;
                    const auto z = args.in_values[0]->data();
                    auto d = args.in_grads[0]->data();
                    for (std::size_t i = 0; i < d.size(); ++i) {
                      const double s = z[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-z[i]))
                                                   : std::exp(z[i]) / (1.0 + std::exp(z[i]));
                      d[i] += gd * (s - t[i]);
                    }
                  });
}

Var loss_mse(const Var& a, const Var& b) {
  Graph& g = common_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) shape_mismatch("loss_mse", shape_str(x.shape()), y.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double diff = x[i] - y[i];
    total += diff * diff;
  }
  const double n = static_cast<double>(x.numel());
  return g.record(OpKind::kMse, {a, b}, Tensor::scalar(total / n),
                  [n](const Graph::BackwardArgs& args) {
                    const double gd = 2.0 * args.out_grad[0] / n;
                    const auto x = args.in_values[0]->data();
                    const auto y = args.in_values[1]->data();
                    if (Tensor* ga = args.in_grads[0]) {
                      auto d = ga->data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd * (x[i] - y[i]);
                    }
                    if (Tensor* gb = args.in_grads[1]) {
                      auto d = gb->data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gd * (x[i] - y[i]);
                    }
                  });
}

Var cosine_similarity_matrix(const Var& a, const Var& b) {
  constexpr double kMinNorm = 1e-12;
  require_rank2("cosine_similarity_matrix", a.value());
  require_rank2("cosine_similarity_matrix", b.value());
  if (a.value().dim(1) != b.value().dim(1)) {
    shape_mismatch("cosine_similarity_matrix",
                   "[? x " + std::to_string(a.value().dim(1)) + "]", b.shape());
  }
  for (const Var* v : {&a, &b}) {
    const Tensor& t = v->value();
    const std::size_t cols = t.dim(1);
    for (std::size_t r = 0; r < t.dim(0); ++r) {
      double ss = 0.0;
      for (std::size_t c = 0; c < cols; ++c) ss += t[r * cols + c] * t[r * cols + c];
      if (std::sqrt(ss) <= kMinNorm) {
        throw std::domain_error("cosine_similarity_matrix: row " + std::to_string(r) +
                                " has zero norm");
      }
    }
  }
  return matmul(l2_normalize_rows(a), transpose2d(l2_normalize_rows(b)));
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport gradient_check(const ScalarFn& f, const Tensor& x, double eps, double tol) {
  GradCheckReport report;
  {
    Graph g;
    const Var input = g.leaf(x);
    const Var out = f(input);
    report.analytic = g.backward(out).of(input).values();
  }
  auto evaluate = [&f](const Tensor& at) {
    Graph g;
    return f(g.constant(at)).value().item();
  };
  Tensor probe = x;
  report.numeric.resize(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = evaluate(probe);
    probe[i] = orig - eps;
    const double down = evaluate(probe);
    probe[i] = orig;
    report.numeric[i] = (up - down) / (2.0 * eps);

    const double a = report.analytic[i];
    const double n = report.numeric[i];
    const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace xalign
