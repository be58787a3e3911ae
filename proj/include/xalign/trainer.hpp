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

#ifndef XALIGN_TRAINER_HPP_
#define XALIGN_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "xalign/data.hpp"
#include "xalign/eval.hpp"
#include "xalign/losses.hpp"
#include "xalign/model.hpp"
#include "xalign/weighting.hpp"

namespace xalign {

// Invalid configuration or input data; detected before the first step.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or gradient turned non-finite during training.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, nlohmann::json diagnostic)
      : std::runtime_error(what), diagnostic_(std::move(diagnostic)) {}
  const nlohmann::json& diagnostic() const { return diagnostic_; }

 private:
  nlohmann::json diagnostic_;
};

struct DataPaths {
  std::filesystem::path eng_train;
  std::filesystem::path tar_train;
  std::filesystem::path eng_eval;  // optional
  std::filesystem::path tar_eval;  // optional
};

struct ExperimentConfig {
  std::string name = "run";
  // vocab_size, num_intents and num_entity_classes are filled from the data.
  EncoderConfig encoder;
  std::vector<Auxiliary> auxiliaries;  // sorted, unique
  WeightingMode weighting = WeightingMode::kOnePlusOne;
  std::size_t epochs = 3;
  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
  std::size_t min_count = 1;
  bool include_outside_in_presence = true;
  double contrastive_temperature = 1.0;
  std::string source_language = "en";
  std::string target_language = "xx";
  DataPaths data;
  std::filesystem::path output_dir;  // empty: nothing is written
  nlohmann::json source;             // the config as read, echoed into the run record
};

// Relative paths resolve against base_dir. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
// Range checks plus existence of every data path.
void validate_config(const ExperimentConfig& config);

struct TrainingData {
  Corpus eng_train;
  Corpus tar_train;
  std::optional<Corpus> eng_eval;
  std::optional<Corpus> tar_eval;
  std::vector<std::string> warnings;
};

TrainingData load_training_data(const ExperimentConfig& config);

struct StepRecord {
  std::size_t step = 0;  // 1-based, over the whole run
  std::size_t epoch = 0;
  double l_ic = 0.0;
  double l_ec = 0.0;
  std::map<std::string, double> aux;      // raw auxiliary losses
  std::map<std::string, double> ratios;   // cov only
  std::map<std::string, double> weights;  // 1.0 under one_plus_one
  std::optional<double> l_ca_eng;
  std::optional<double> l_ca_tar;
  double total = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_total = 0.0;
  std::optional<MetricsReport> eng;
  std::optional<MetricsReport> tar;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunRecord {
  std::string name;
  nlohmann::json config;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::optional<MetricsReport> final_eng;
  std::optional<MetricsReport> final_tar;
  std::filesystem::path checkpoint;
  double wall_seconds = 0.0;
  std::size_t eng_encode_calls = 0;  // training steps only
  std::size_t tar_encode_calls = 0;
  std::vector<std::string> warnings;
};

void to_json(nlohmann::json& j, const StepRecord& s);
void to_json(nlohmann::json& j, const EpochRecord& e);
void to_json(nlohmann::json& j, const RunRecord& r);

// Everything needed to turn a checkpoint back into a predictor.
struct Predictor {
  ModelParams params;
  Vocab vocab;
  LabelSet intents;
  TagScheme scheme;  // IO
};

nlohmann::json predictor_metadata(const Predictor& p);
Predictor predictor_from_checkpoint(const Checkpoint& ckpt);

struct TrainResult {
  RunRecord record;
  Predictor predictor;
};

// In-memory training. Files are written only when config.output_dir is set.
TrainResult train(const ExperimentConfig& config, const TrainingData& data);
// Loads the data named in the config, then trains.
TrainResult train(const ExperimentConfig& config);

// p <- p - lr * g, in parameter order. Throws std::domain_error on a
// non-finite gradient and std::invalid_argument on lr <= 0 or misalignment.
void sgd_step(ModelParams& params, const std::vector<Tensor>& grads, double lr);

struct Predictions {
  std::vector<int> intents;
  std::vector<TagSequence> io_tags;  // one per utterance, full length
};

// Greedy argmax with ties to the lowest index. Positions beyond seq_len - 1
// are predicted O.
Predictions predict(const Predictor& predictor, const Corpus& corpus, std::size_t batch_size = 64);

// Needs gold tags on every utterance; throws ConfigError when the corpus
// uses an entity type the predictor's scheme lacks.
MetricsReport evaluate(const Predictor& predictor, const Corpus& gold);

struct GridRow {
  std::string name;
  bool ok = false;
  std::string error;
  RunRecord record;
};

struct PairwiseTest {
  std::string a;
  std::string b;
  std::size_t k1 = 0, n1 = 0, k2 = 0, n2 = 0;  // target intent correct / total
  SignificanceResult result;
};

struct GridResult {
  std::vector<GridRow> rows;  // ranked by target Overall, failures last
  std::vector<PairwiseTest> tests;
};

// Runs every config; a failing run is marked and the grid continues.
GridResult run_grid(const std::vector<ExperimentConfig>& configs);
// All *.json files of a directory, in file name order.
std::vector<ExperimentConfig> load_grid_configs(const std::filesystem::path& dir);
std::string format_grid_table(const GridResult& grid);
void to_json(nlohmann::json& j, const GridResult& g);

}  // namespace xalign

#endif  // XALIGN_TRAINER_HPP_
