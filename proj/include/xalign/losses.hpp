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

#ifndef XALIGN_LOSSES_HPP_
#define XALIGN_LOSSES_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xalign/model.hpp"
#include "xalign/tagging.hpp"
#include "xalign/tensor.hpp"

namespace xalign {

enum class Auxiliary { kCrossAligner, kXeroAlign, kContrastive, kTranslateIntent };

Auxiliary parse_auxiliary(std::string_view name);  // "crossaligner" | "xeroalign" | ...
const char* to_string(Auxiliary aux);

struct TaskLosses {
  Var l_ic;
  Var l_ec;
};

// ec_logits is batch x seq_len x E; y_ec is batch x seq_len IO indices.
TaskLosses task_loss(const Var& ic_logits, const Var& ec_logits, std::span<const int> y_ic,
                     std::span<const int> y_ec, int ignore_index = kIgnoreIndex);

struct CrossAlignerLosses {
  Var l_eng;
  Var l_tar;
};

// The same presence targets supervise both languages through the shared head.
CrossAlignerLosses crossaligner_loss(const BoundParams& p, const Var& ec_logits_eng,
                                     const Var& ec_logits_tar, const Tensor& y_ca);

// Row i of cos(cls_eng, cls_tar) / temperature scored against label i.
// English rows only; no target-anchored term.
Var contrastive_loss(const Var& cls_eng, const Var& cls_tar, double temperature = 1.0);

Var translate_intent_loss(const Var& ic_logits_tar, std::span<const int> y_ic);

Var xeroalign_loss(const Var& cls_eng, const Var& cls_tar);

// Every loss of one step. The crossaligner entry of `aux` is l_eng + l_tar;
// the two halves are kept in `crossaligner` for logging.
struct LossBundle {
  Var l_ic;
  Var l_ec;
  std::map<std::string, Var> aux;
  std::optional<CrossAlignerLosses> crossaligner;

  std::map<std::string, double> aux_values() const;
  // Throws std::domain_error when some loss is negative or non-finite.
  void validate() const;
};

}  // namespace xalign

#endif  // XALIGN_LOSSES_HPP_
