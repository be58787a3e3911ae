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

#ifndef XALIGN_MODEL_HPP_
#define XALIGN_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "xalign/tensor.hpp"

namespace xalign {

enum class PoolingMode { kCls, kMean };
enum class EncoderKind { kTransformer, kBag };

PoolingMode parse_pooling_mode(std::string_view text);  // "cls" | "mean"
EncoderKind parse_encoder_kind(std::string_view text);  // "transformer" | "bag"
const char* to_string(PoolingMode mode);
const char* to_string(EncoderKind kind);

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_size = 64;
  std::size_t num_layers = 1;
  std::size_t seq_len = 24;
  std::size_t num_intents = 0;
  std::size_t num_entity_classes = 0;  // includes O
  PoolingMode pooling = PoolingMode::kCls;
  EncoderKind kind = EncoderKind::kTransformer;

  void validate() const;  // throws std::invalid_argument

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// Named parameter tensors in a fixed order:
//   tok_emb [V x H], pos_emb [S x H]
//   transformer, per layer l: l.wq l.wk l.wv l.wo [H x H], l.w1 l.w2 [H x H], l.b1 l.b2 [H]
//   bag, per layer l:         l.w_self l.w_ctx [H x H], l.b [H]
//   ic_w [H x I], ic_b [I], ec_w [H x E], ec_b [E], ca_w [(S*E) x E], ca_b [E]
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(EncoderConfig config) : config_(std::move(config)) {}

  const EncoderConfig& config() const { return config_; }

  void add(std::string name, Tensor value);
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& tensor(std::size_t i) { return tensors_.at(i); }
  const Tensor& tensor(std::size_t i) const { return tensors_.at(i); }
  std::size_t num_scalars() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.config_ == b.config_ && a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  EncoderConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

ModelParams init_model(const EncoderConfig& config, std::uint64_t seed);

// The parameters as leaves of one graph, in ModelParams order.
class BoundParams {
 public:
  BoundParams(Graph& graph, const ModelParams& params, bool trainable = true);

  const EncoderConfig& config() const { return params_->config(); }
  Graph& graph() const { return *graph_; }
  const Var& operator[](std::string_view name) const;
  const std::vector<Var>& vars() const { return vars_; }
  // Substitutes another node for one parameter (gradient checks).
  void replace(std::string_view name, Var v);

 private:
  Graph* graph_;
  const ModelParams* params_;
  std::vector<Var> vars_;
};

struct EncoderOutput {
  Var cls;     // batch x H
  Var tokens;  // batch x seq_len x H
  Tensor mask; // batch x seq_len
};

// ids and mask are batch x seq_len, row-major.
EncoderOutput encode(const BoundParams& p, std::span<const int> ids, std::span<const int> mask,
                     std::size_t batch);
EncoderOutput encode(const BoundParams& p, std::span<const int> ids, std::span<const int> mask,
                     std::size_t batch, PoolingMode pooling);

Var intent_logits(const BoundParams& p, const Var& cls);
Var entity_logits(const BoundParams& p, const Var& tokens);
Var crossaligner_predict(const BoundParams& p, const Var& ec_logits);

// Checkpoint file: JSON with a version, the config and every tensor. Doubles
// are written in shortest round-trip form, so loading is bit-exact.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  nlohmann::json metadata;  // caller-owned (vocab, label sets, run info)
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xalign

#endif  // XALIGN_MODEL_HPP_
