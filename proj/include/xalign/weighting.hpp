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

#ifndef XALIGN_WEIGHTING_HPP_
#define XALIGN_WEIGHTING_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "xalign/tensor.hpp"

namespace xalign {

enum class WeightingMode { kOnePlusOne, kCov };

WeightingMode parse_weighting_mode(std::string_view text);  // "one_plus_one" | "1+1" | "cov"
const char* to_string(WeightingMode mode);

// Running history of one auxiliary loss. `loss_mean` covers steps 1..t and
// is folded in after the weight of step t is computed, so during the update
// it still holds the mean up to t - 1.
struct CovTrack {
  std::size_t t = 0;
  double loss_mean = 0.0;
  double ratio_mean = 0.0;
  double ratio_m2 = 0.0;  // Welford sum of squared deviations
  double ratio = 0.0;     // ratio of the latest step
  double weight = 0.0;    // weight of the latest step
  bool degenerate = false;

  double ratio_stddev() const;  // population
};

struct CoVState {
  std::map<std::string, CovTrack> tracks;
};

// The ratio assigned at t = 1, where no previous mean loss exists.
inline constexpr double kBootstrapRatio = 1.0;

// Advances every named auxiliary by one step and returns its weight
// std(ratios) / mean(ratios). Weights are not normalised across auxiliaries.
std::map<std::string, double> cov_update(CoVState& state,
                                         const std::map<std::string, double>& raw_losses);

// L_ic + L_ec + sum_a w_a * L_a. Unit weights under one_plus_one.
Var combine_total(const Var& l_ic, const Var& l_ec, const std::map<std::string, Var>& aux,
                  WeightingMode mode, const std::map<std::string, double>& weights);
double combine_total(double l_ic, double l_ec, const std::map<std::string, double>& aux,
                     WeightingMode mode, const std::map<std::string, double>& weights);

}  // namespace xalign

#endif  // XALIGN_WEIGHTING_HPP_
