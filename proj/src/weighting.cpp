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

#include "xalign/weighting.hpp"

#include <cmath>
#include <stdexcept>

namespace xalign {

WeightingMode parse_weighting_mode(std::string_view text) {
  if (text == "one_plus_one" || text == "1+1") return WeightingMode::kOnePlusOne;
  if (text == "cov") return WeightingMode::kCov;
  throw std::invalid_argument("unknown weighting mode '" + std::string(text) + "'");
}

const char* to_string(WeightingMode mode) {
  return mode == WeightingMode::kCov ? "cov" : "one_plus_one";
}

double CovTrack::ratio_stddev() const {
  return t ? std::sqrt(ratio_m2 / static_cast<double>(t)) : 0.0;
}

std::map<std::string, double> cov_update(CoVState& state,
                                         const std::map<std::string, double>& raw_losses) {
  for (const auto& [name, loss] : raw_losses) {
    if (!std::isfinite(loss) || loss < 0.0) {
      throw std::invalid_argument("cov_update: loss '" + name + "' is " + std::to_string(loss));
    }
  }
  std::map<std::string, double> weights;
  for (const auto& [name, loss] : raw_losses) {
    CovTrack& tr = state.tracks[name];
    ++tr.t;
    tr.degenerate = false;
    if (tr.t == 1) {
      tr.ratio = kBootstrapRatio;
    } else if (tr.loss_mean > 0.0) {
      tr.ratio = loss / tr.loss_mean;
    } else {
      // Every previous loss was zero; treat the step like the first one.
      tr.ratio = kBootstrapRatio;
      tr.degenerate = true;
    }

    const double n = static_cast<double>(tr.t);
    const double delta = tr.ratio - tr.ratio_mean;
    tr.ratio_mean += delta / n;
    tr.ratio_m2 += delta * (tr.ratio - tr.ratio_mean);
    if (tr.ratio_m2 < 0.0) tr.ratio_m2 = 0.0;

    if (tr.ratio_mean == 0.0) {
      tr.weight = 0.0;
      tr.degenerate = true;
    } else {
      tr.weight = tr.ratio_stddev() / tr.ratio_mean;
    }

    tr.loss_mean += (loss - tr.loss_mean) / n;
    weights[name] = tr.weight;
  }
  return weights;
}

namespace {

double weight_for(const std::string& name, WeightingMode mode,
                  const std::map<std::string, double>& weights) {
  if (mode == WeightingMode::kOnePlusOne) return 1.0;
  auto it = weights.find(name);
  if (it == weights.end()) {
    throw std::invalid_argument("combine_total: no weight for auxiliary '" + name + "'");
  }
  return it->second;
}

}  // namespace

Var combine_total(const Var& l_ic, const Var& l_ec, const std::map<std::string, Var>& aux,
                  WeightingMode mode, const std::map<std::string, double>& weights) {
  Var total = add(l_ic, l_ec);
  for (const auto& [name, loss] : aux) {
    const double w = weight_for(name, mode, weights);
    total = add(total, mode == WeightingMode::kOnePlusOne ? loss : scale(loss, w));
  }
  return total;
}

double combine_total(double l_ic, double l_ec, const std::map<std::string, double>& aux,
                     WeightingMode mode, const std::map<std::string, double>& weights) {
  double total = l_ic + l_ec;
  for (const auto& [name, loss] : aux) {
    const double w = weight_for(name, mode, weights);
    total = total + (mode == WeightingMode::kOnePlusOne ? loss : loss * w);
  }
  return total;
}

}  // namespace xalign
