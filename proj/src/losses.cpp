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

#include "xalign/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace xalign {

Auxiliary parse_auxiliary(std::string_view name) {
  if (name == "crossaligner") return Auxiliary::kCrossAligner;
  if (name == "xeroalign") return Auxiliary::kXeroAlign;
  if (name == "contrastive") return Auxiliary::kContrastive;
  if (name == "translate_intent") return Auxiliary::kTranslateIntent;
  throw std::invalid_argument("unknown auxiliary loss '" + std::string(name) + "'");
}

const char* to_string(Auxiliary aux) {
  switch (aux) {
    case Auxiliary::kCrossAligner:
      return "crossaligner";
    case Auxiliary::kXeroAlign:
      return "xeroalign";
    case Auxiliary::kContrastive:
      return "contrastive";
    case Auxiliary::kTranslateIntent:
      return "translate_intent";
  }
  return "?";
}

TaskLosses task_loss(const Var& ic_logits, const Var& ec_logits, std::span<const int> y_ic,
                     std::span<const int> y_ec, int ignore_index) {
  const Shape& s = ec_logits.shape();
  if (s.size() != 3) throw ShapeError("task_loss: ec_logits must be rank 3, got " + shape_str(s));
  if (ic_logits.shape().size() != 2 || ic_logits.shape()[0] != s[0]) {
    throw ShapeError("task_loss: ic_logits " + shape_str(ic_logits.shape()) + " vs ec_logits " +
                     shape_str(s));
  }
  TaskLosses out;
  out.l_ic = loss_cross_entropy(ic_logits, y_ic);
  out.l_ec = loss_cross_entropy(reshape(ec_logits, {s[0] * s[1], s[2]}), y_ec, ignore_index);
  return out;
}

CrossAlignerLosses crossaligner_loss(const BoundParams& p, const Var& ec_logits_eng,
                                     const Var& ec_logits_tar, const Tensor& y_ca) {
  return {loss_binary_cross_entropy(crossaligner_predict(p, ec_logits_eng), y_ca),
          loss_binary_cross_entropy(crossaligner_predict(p, ec_logits_tar), y_ca)};
}

Var contrastive_loss(const Var& cls_eng, const Var& cls_tar, double temperature) {
  if (cls_eng.shape() != cls_tar.shape() || cls_eng.shape().size() != 2) {
    throw ShapeError("contrastive_loss: " + shape_str(cls_eng.shape()) + " vs " +
                     shape_str(cls_tar.shape()));
  }
  const std::size_t n = cls_eng.shape()[0];
  if (n < 2) throw std::invalid_argument("contrastive_loss: needs at least 2 pairs for negatives");
  if (!(temperature > 0.0)) throw std::invalid_argument("contrastive_loss: temperature must be > 0");
  Var sim = cosine_similarity_matrix(cls_eng, cls_tar);
  if (temperature != 1.0) sim = scale(sim, 1.0 / temperature);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i);
  return loss_cross_entropy(sim, labels);
}

Var translate_intent_loss(const Var& ic_logits_tar, std::span<const int> y_ic) {
  return loss_cross_entropy(ic_logits_tar, y_ic);
}

Var xeroalign_loss(const Var& cls_eng, const Var& cls_tar) { return loss_mse(cls_eng, cls_tar); }

std::map<std::string, double> LossBundle::aux_values() const {
  std::map<std::string, double> out;
  for (const auto& [name, v] : aux) out[name] = v.value().item();
  return out;
}

void LossBundle::validate() const {
  auto check = [](const std::string& name, const Var& v) {
    const double x = v.value().item();
    if (!std::isfinite(x) || x < 0.0) {
      throw std::domain_error("loss '" + name + "' is " + std::to_string(x));
    }
  };
  check("ic", l_ic);
  check("ec", l_ec);
  for (const auto& [name, v] : aux) check(name, v);
}

}  // namespace xalign
