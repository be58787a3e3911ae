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

#ifndef XALIGN_EVAL_HPP_
#define XALIGN_EVAL_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xalign/tagging.hpp"

namespace xalign {

struct EntityScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct MetricsCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t n_intents_correct = 0;
  std::size_t n_intents_total = 0;

  friend bool operator==(const MetricsCounts&, const MetricsCounts&) = default;
};

// All rates are fractions in [0, 1]; human-readable output scales by 100.
struct MetricsReport {
  double intent_accuracy = 0.0;
  double entity_precision = 0.0;
  double entity_recall = 0.0;
  double entity_f1 = 0.0;
  double overall = 0.0;
  MetricsCounts counts;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct SignificanceResult {
  double z = 0.0;
  double p_two_tailed = 1.0;
  double pooled_p = 0.0;
  // False when the pooled proportion is 0 or 1 and the test has no variance.
  bool defined = true;
  std::map<double, bool> significant_at;
};

double intent_accuracy(std::span<const int> predicted, std::span<const int> gold);

// Micro-averaged exact-match span scores. Predictions are IO sequences and
// get their B-tags restored; gold sequences are BIO.
EntityScore entity_f_score(const std::vector<TagSequence>& predicted_io,
                           const std::vector<TagSequence>& gold_bio);

// Mean of two percentages in [0, 100].
double overall_score(double accuracy_pct, double f1_pct);

double standard_normal_cdf(double x);

// Two-tailed pooled z-test for k1/n1 versus k2/n2.
SignificanceResult z_test_proportions(std::size_t k1, std::size_t n1, std::size_t k2,
                                      std::size_t n2);

MetricsReport make_report(std::span<const int> predicted_intents, std::span<const int> gold_intents,
                          const std::vector<TagSequence>& predicted_io,
                          const std::vector<TagSequence>& gold_bio);

// One-decimal percentages, e.g. "acc 96.5 | P 80.0 R 84.4 F 82.1 | overall 89.3".
std::string format_report(const MetricsReport& report);

void to_json(nlohmann::json& j, const MetricsCounts& c);
void from_json(const nlohmann::json& j, MetricsCounts& c);
void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);
void to_json(nlohmann::json& j, const SignificanceResult& r);

}  // namespace xalign

#endif  // XALIGN_EVAL_HPP_
