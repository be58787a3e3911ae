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

#include "xalign/eval.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace xalign {

double intent_accuracy(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size()) {
    throw std::invalid_argument("intent_accuracy: " + std::to_string(predicted.size()) +
                                " predictions for " + std::to_string(gold.size()) + " labels");
  }
  if (gold.empty()) throw std::invalid_argument("intent_accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += predicted[i] == gold[i];
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

EntityScore entity_f_score(const std::vector<TagSequence>& predicted_io,
                           const std::vector<TagSequence>& gold_bio) {
  if (predicted_io.size() != gold_bio.size()) {
    throw std::invalid_argument("entity_f_score: " + std::to_string(predicted_io.size()) +
                                " predicted utterances for " + std::to_string(gold_bio.size()));
  }
  EntityScore s;
  for (std::size_t u = 0; u < gold_bio.size(); ++u) {
    if (predicted_io[u].size() != gold_bio[u].size()) {
      throw std::invalid_argument("entity_f_score: length mismatch in utterance " +
                                  std::to_string(u));
    }
    const auto pred = extract_spans(restore_b_tags(predicted_io[u]));
    const auto gold = extract_spans(gold_bio[u]);
    const std::set<Span> gold_set(gold.begin(), gold.end());
    std::size_t hits = 0;
    for (const auto& span : pred) hits += gold_set.count(span);
    s.tp += hits;
    s.fp += pred.size() - hits;
    s.fn += gold.size() - hits;
  }
  const double tp = static_cast<double>(s.tp);
  s.precision = s.tp + s.fp ? tp / static_cast<double>(s.tp + s.fp) : 0.0;
  s.recall = s.tp + s.fn ? tp / static_cast<double>(s.tp + s.fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

double overall_score(double accuracy_pct, double f1_pct) {
  for (double v : {accuracy_pct, f1_pct}) {
    if (!(v >= 0.0 && v <= 100.0)) {
      throw std::invalid_argument("overall_score: percentage " + std::to_string(v) +
                                  " outside [0, 100]");
    }
  }
  return 0.5 * (accuracy_pct + f1_pct);
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

SignificanceResult z_test_proportions(std::size_t k1, std::size_t n1, std::size_t k2,
                                      std::size_t n2) {
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("z_test_proportions: empty group");
  if (k1 > n1 || k2 > n2) throw std::invalid_argument("z_test_proportions: successes exceed trials");
  SignificanceResult r;
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  r.pooled_p = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  const double var =
      r.pooled_p * (1.0 - r.pooled_p) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));
  if (k1 + k2 == 0 || k1 + k2 == n1 + n2) {
    r.defined = false;
    r.significant_at = {{0.01, false}, {0.05, false}};
    return r;
  }
  r.z = (p1 - p2) / std::sqrt(var);
  r.p_two_tailed = 2.0 * (1.0 - standard_normal_cdf(std::abs(r.z)));
  r.significant_at = {{0.01, r.p_two_tailed < 0.01}, {0.05, r.p_two_tailed < 0.05}};
  return r;
}

MetricsReport make_report(std::span<const int> predicted_intents, std::span<const int> gold_intents,
                          const std::vector<TagSequence>& predicted_io,
                          const std::vector<TagSequence>& gold_bio) {
  MetricsReport r;
  r.intent_accuracy = intent_accuracy(predicted_intents, gold_intents);
  const EntityScore e = entity_f_score(predicted_io, gold_bio);
  r.entity_precision = e.precision;
  r.entity_recall = e.recall;
  r.entity_f1 = e.f1;
  r.overall = overall_score(100.0 * r.intent_accuracy, 100.0 * r.entity_f1) / 100.0;
  r.counts.tp = e.tp;
  r.counts.fp = e.fp;
  r.counts.fn = e.fn;
  r.counts.n_intents_total = gold_intents.size();
  for (std::size_t i = 0; i < gold_intents.size(); ++i) {
    r.counts.n_intents_correct += predicted_intents[i] == gold_intents[i];
  }
  return r;
}

std::string format_report(const MetricsReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "acc %.1f | P %.1f R %.1f F %.1f | overall %.1f",
                100.0 * r.intent_accuracy, 100.0 * r.entity_precision, 100.0 * r.entity_recall,
                100.0 * r.entity_f1, 100.0 * r.overall);
  return buf;
}

void to_json(nlohmann::json& j, const MetricsCounts& c) {
  j = {{"tp", c.tp},
       {"fp", c.fp},
       {"fn", c.fn},
       {"n_intents_correct", c.n_intents_correct},
       {"n_intents_total", c.n_intents_total}};
}

void from_json(const nlohmann::json& j, MetricsCounts& c) {
  j.at("tp").get_to(c.tp);
  j.at("fp").get_to(c.fp);
  j.at("fn").get_to(c.fn);
  j.at("n_intents_correct").get_to(c.n_intents_correct);
  j.at("n_intents_total").get_to(c.n_intents_total);
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = {{"intent_accuracy", r.intent_accuracy},
       {"entity_precision", r.entity_precision},
       {"entity_recall", r.entity_recall},
       {"entity_f1", r.entity_f1},
       {"overall", r.overall},
       {"counts", r.counts}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  j.at("intent_accuracy").get_to(r.intent_accuracy);
  j.at("entity_precision").get_to(r.entity_precision);
  j.at("entity_recall").get_to(r.entity_recall);
  j.at("entity_f1").get_to(r.entity_f1);
  j.at("overall").get_to(r.overall);
  j.at("counts").get_to(r.counts);
}

void to_json(nlohmann::json& j, const SignificanceResult& r) {
  j = {{"z", r.z},
       {"p_two_tailed", r.p_two_tailed},
       {"pooled_p", r.pooled_p},
       {"defined", r.defined},
       {"significant_at", {{"0.05", r.significant_at.at(0.05)}, {"0.01", r.significant_at.at(0.01)}}}};
}

}  // namespace xalign
