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

#include "xalign/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>

#include "xalign/random.hpp"

namespace xalign {

using nlohmann::json;

PoolingMode parse_pooling_mode(std::string_view text) {
  if (text == "cls") return PoolingMode::kCls;
  if (text == "mean") return PoolingMode::kMean;
  throw std::invalid_argument("unknown pooling mode '" + std::string(text) + "'");
}

EncoderKind parse_encoder_kind(std::string_view text) {
  if (text == "transformer") return EncoderKind::kTransformer;
  if (text == "bag") return EncoderKind::kBag;
  throw std::invalid_argument("unknown encoder kind '" + std::string(text) + "'");
}

const char* to_string(PoolingMode mode) { return mode == PoolingMode::kCls ? "cls" : "mean"; }

const char* to_string(EncoderKind kind) {
  return kind == EncoderKind::kTransformer ? "transformer" : "bag";
}

void EncoderConfig::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(std::string("encoder config: ") + msg);
  };
  need(vocab_size >= 3, "vocab_size must cover the reserved ids");
  need(hidden_size >= 1, "hidden_size must be positive");
  need(seq_len >= 2, "seq_len must be at least 2");
  need(num_intents >= 1, "num_intents must be positive");
  need(num_entity_classes >= 2, "num_entity_classes must be at least 2");
}

void to_json(json& j, const EncoderConfig& c) {
  j = json{{"vocab_size", c.vocab_size},
           {"hidden_size", c.hidden_size},
           {"num_layers", c.num_layers},
           {"seq_len", c.seq_len},
           {"num_intents", c.num_intents},
           {"num_entity_classes", c.num_entity_classes},
           {"pooling", to_string(c.pooling)},
           {"kind", to_string(c.kind)}};
}

void from_json(const json& j, EncoderConfig& c) {
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.seq_len = j.at("seq_len").get<std::size_t>();
  c.num_intents = j.at("num_intents").get<std::size_t>();
  c.num_entity_classes = j.at("num_entity_classes").get<std::size_t>();
  c.pooling = parse_pooling_mode(j.at("pooling").get<std::string>());
  c.kind = parse_encoder_kind(j.at("kind").get<std::string>());
}

void ModelParams::add(std::string name, Tensor value) {
  if (!index_.emplace(name, tensors_.size()).second) {
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  }
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

Tensor& ModelParams::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return tensors_[it->second];
}

const Tensor& ModelParams::get(std::string_view name) const {
  return const_cast<ModelParams*>(this)->get(name);
}

bool ModelParams::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

namespace {

std::string layer_name(std::size_t layer, const char* what) {
  return std::to_string(layer) + "." + what;
}

}  // namespace

ModelParams init_model(const EncoderConfig& c, std::uint64_t seed) {
  c.validate();
  Rng rng(seed);
  ModelParams p(c);
  auto weight = [&](std::string name, std::size_t rows, std::size_t cols) {
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.uniform(-s, s);
    p.add(std::move(name), Tensor({rows, cols}, std::move(v)));
  };
  auto bias = [&](std::string name, std::size_t n) { p.add(std::move(name), Tensor::zeros({n})); };

  const std::size_t H = c.hidden_size, E = c.num_entity_classes;
  weight("tok_emb", c.vocab_size, H);
  weight("pos_emb", c.seq_len, H);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    if (c.kind == EncoderKind::kTransformer) {
      for (const char* w : {"wq", "wk", "wv", "wo", "w1", "w2"}) weight(layer_name(l, w), H, H);
      bias(layer_name(l, "b1"), H);
      bias(layer_name(l, "b2"), H);
    } else {
      weight(layer_name(l, "w_self"), H, H);
      weight(layer_name(l, "w_ctx"), H, H);
      bias(layer_name(l, "b"), H);
    }
  }
  weight("ic_w", H, c.num_intents);
  bias("ic_b", c.num_intents);
  weight("ec_w", H, E);
  bias("ec_b", E);
  weight("ca_w", c.seq_len * E, E);
  bias("ca_b", E);
  return p;
}

BoundParams::BoundParams(Graph& graph, const ModelParams& params, bool trainable)
    : graph_(&graph), params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars_.push_back(graph.leaf(params.tensor(i), trainable));
}

namespace {

std::size_t param_index(const ModelParams& p, std::string_view name) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.name(i) == name) return i;
  }
  throw std::out_of_range("no parameter '" + std::string(name) + "'");
}

}  // namespace

const Var& BoundParams::operator[](std::string_view name) const {
  return vars_[param_index(*params_, name)];
}

void BoundParams::replace(std::string_view name, Var v) {
  const std::size_t i = param_index(*params_, name);
  if (v.shape() != vars_[i].shape()) throw ShapeError("replace: shape mismatch for " + std::string(name));
  vars_[i] = std::move(v);
}

namespace {

Var affine(const Var& x, const Var& w, const Var& b) { return add(matmul(x, w), b); }

// Single-head scaled dot-product attention, one example at a time so the
// score matrices stay S x S.
Var self_attention(const BoundParams& p, std::size_t l, const Var& x, const Tensor& mask,
                   std::size_t batch, std::size_t S) {
  Graph& g = p.graph();
  const std::size_t H = p.config().hidden_size;
  const Var q = matmul(x, p[layer_name(l, "wq")]);
  const Var k = matmul(x, p[layer_name(l, "wk")]);
  const Var v = matmul(x, p[layer_name(l, "wv")]);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(H));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<Var> outs;
  outs.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const Var qb = slice_rows(q, b * S, S);
    const Var kb = slice_rows(k, b * S, S);
    const Var vb = slice_rows(v, b * S, S);
    std::vector<double> key_mask(S);
    for (std::size_t s = 0; s < S; ++s) key_mask[s] = mask[b * S + s] ? 0.0 : neg_inf;
    const Var scores =
        add(scale(matmul(qb, transpose2d(kb)), inv_sqrt), g.constant(Tensor({S}, key_mask)));
    outs.push_back(matmul(softmax_rows(scores), vb));
  }
  return concat_rows(outs);
}

// Row b holds 1/n_b at the real positions of example b.
Tensor mean_pool_matrix(const Tensor& mask, std::size_t batch, std::size_t S) {
  Tensor m = Tensor::zeros({batch, batch * S});
  for (std::size_t b = 0; b < batch; ++b) {
    double n = 0.0;
    for (std::size_t s = 0; s < S; ++s) n += mask[b * S + s];
    for (std::size_t s = 0; s < S; ++s) m.at(b, b * S + s) = mask[b * S + s] / n;
  }
  return m;
}

}  // namespace

EncoderOutput encode(const BoundParams& p, std::span<const int> ids, std::span<const int> mask,
                     std::size_t batch) {
  return encode(p, ids, mask, batch, p.config().pooling);
}

EncoderOutput encode(const BoundParams& p, std::span<const int> ids, std::span<const int> mask,
                     std::size_t batch, PoolingMode pooling) {
  const EncoderConfig& c = p.config();
  const std::size_t S = c.seq_len, H = c.hidden_size;
  if (batch == 0) throw ShapeError("encode: empty batch");
  if (ids.size() != batch * S) {
    throw ShapeError("encode: expected " + std::to_string(batch * S) + " ids, got " +
                     std::to_string(ids.size()));
  }
  if (mask.size() != ids.size()) throw ShapeError("encode: mask and ids differ in size");
  std::vector<std::size_t> tok_rows(ids.size()), pos_rows(ids.size());
  std::vector<double> mask_values(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= c.vocab_size) {
      throw IndexError("encode: token id " + std::to_string(ids[i]) + " outside vocab of " +
                       std::to_string(c.vocab_size));
    }
    if (mask[i] != 0 && mask[i] != 1) throw std::invalid_argument("encode: mask must be 0/1");
    tok_rows[i] = static_cast<std::size_t>(ids[i]);
    pos_rows[i] = i % S;
    mask_values[i] = mask[i];
  }
  for (std::size_t b = 0; b < batch; ++b) {
    if (mask[b * S] != 1) throw std::invalid_argument("encode: position 0 must be unmasked");
  }
  Tensor mask_t({batch, S}, std::move(mask_values));

  Graph& g = p.graph();
  Var x = add(gather_rows(p["tok_emb"], tok_rows), gather_rows(p["pos_emb"], pos_rows));
  std::optional<Var> pool;
  auto pool_var = [&]() -> const Var& {
    if (!pool) pool = g.constant(mean_pool_matrix(mask_t, batch, S));
    return *pool;
  };
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    if (c.kind == EncoderKind::kTransformer) {
      x = add(x, matmul(self_attention(p, l, x, mask_t, batch, S), p[layer_name(l, "wo")]));
      const Var h = tanh(affine(x, p[layer_name(l, "w1")], p[layer_name(l, "b1")]));
      x = add(x, affine(h, p[layer_name(l, "w2")], p[layer_name(l, "b2")]));
    } else {
      // Each position sees itself plus the masked mean of its utterance.
      std::vector<std::size_t> owner(batch * S);
      for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = i / S;
      const Var spread = gather_rows(matmul(pool_var(), x), std::move(owner));
      const Var pre = add(add(matmul(x, p[layer_name(l, "w_self")]),
                              matmul(spread, p[layer_name(l, "w_ctx")])),
                          p[layer_name(l, "b")]);
      x = add(x, tanh(pre));
    }
  }

  EncoderOutput out;
  out.tokens = reshape(x, {batch, S, H});
  if (pooling == PoolingMode::kCls) {
    std::vector<std::size_t> cls_rows(batch);
    for (std::size_t b = 0; b < batch; ++b) cls_rows[b] = b * S;
    out.cls = gather_rows(x, std::move(cls_rows));
  } else {
    out.cls = matmul(pool_var(), x);
  }
  out.mask = std::move(mask_t);
  return out;
}

Var intent_logits(const BoundParams& p, const Var& cls) {
  const std::size_t H = p.config().hidden_size;
  if (cls.shape().size() != 2 || cls.shape()[1] != H) {
    throw ShapeError("intent_logits: cls must be batch x " + std::to_string(H) + ", got " +
                     shape_str(cls.shape()));
  }
  return affine(cls, p["ic_w"], p["ic_b"]);
}

Var entity_logits(const BoundParams& p, const Var& tokens) {
  const EncoderConfig& c = p.config();
  const Shape& s = tokens.shape();
  if (s.size() != 3 || s[1] != c.seq_len || s[2] != c.hidden_size) {
    throw ShapeError("entity_logits: tokens must be batch x " + std::to_string(c.seq_len) + " x " +
                     std::to_string(c.hidden_size) + ", got " + shape_str(s));
  }
  const Var flat = reshape(tokens, {s[0] * s[1], s[2]});
  return reshape(affine(flat, p["ec_w"], p["ec_b"]), {s[0], s[1], c.num_entity_classes});
}

Var crossaligner_predict(const BoundParams& p, const Var& ec_logits) {
  const EncoderConfig& c = p.config();
  const Shape& s = ec_logits.shape();
  if (s.size() != 3 || s[1] * s[2] != c.seq_len * c.num_entity_classes ||
      s[2] != c.num_entity_classes) {
    throw ShapeError("crossaligner_predict: logits must be batch x " + std::to_string(c.seq_len) +
                     " x " + std::to_string(c.num_entity_classes) + ", got " + shape_str(s));
  }
  const Var flat = reshape(ec_logits, {s[0], s[1] * s[2]});
  return affine(flat, p["ca_w"], p["ca_b"]);
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json tensors = json::array();
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const Tensor& t = ckpt.params.tensor(i);
    tensors.push_back({{"name", ckpt.params.name(i)}, {"shape", t.shape()}, {"data", t.values()}});
  }
  return json{{"format", "xalign-checkpoint"},
              {"version", kCheckpointVersion},
              {"config", ckpt.params.config()},
              {"tensors", std::move(tensors)},
              {"metadata", ckpt.metadata}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "xalign-checkpoint") throw std::invalid_argument("not a checkpoint");
  const int version = j.at("version").get<int>();
  if (version != kCheckpointVersion) {
    throw std::invalid_argument("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const EncoderConfig config = j.at("config").get<EncoderConfig>();
  config.validate();
  ckpt.params = ModelParams(config);
  for (const auto& t : j.at("tensors")) {
    ckpt.params.add(t.at("name").get<std::string>(),
                    Tensor(t.at("shape").get<Shape>(), t.at("data").get<std::vector<double>>()));
  }
  // Layout must match a fresh model of the same config.
  const ModelParams fresh = init_model(config, 0);
  if (fresh.size() != ckpt.params.size()) throw std::invalid_argument("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    if (fresh.name(i) != ckpt.params.name(i) ||
        fresh.tensor(i).shape() != ckpt.params.tensor(i).shape()) {
      throw std::invalid_argument("checkpoint tensor '" + ckpt.params.name(i) + "' does not fit the config");
    }
  }
  ckpt.metadata = j.value("metadata", json::object());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace xalign
