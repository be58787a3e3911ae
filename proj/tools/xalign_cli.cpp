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

// Command-line front end: corpus generation, training, evaluation, grids and
// significance tests. Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "xalign/trainer.hpp"

namespace {

using namespace xalign;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int cmd_gen_corpus(const fs::path& spec_path, const fs::path& out, std::uint64_t seed, std::size_t n_train,
                   std::size_t n_eval) {
  const CipherSpec spec = load_cipher_spec(spec_path);
  const BenchmarkSplits s = gen_benchmark(spec, n_train, n_eval, seed);
  fs::create_directories(out);
  save_corpus(out / "eng_train.jsonl", s.eng_train);
  save_corpus(out / "tar_train.jsonl", s.tar_train);
  save_corpus(out / "eng_eval.jsonl", s.eng_eval);
  save_corpus(out / "tar_eval.jsonl", s.tar_eval);
  std::printf("wrote %zu train and %zu eval utterances per language to %s\n", s.eng_train.size(),
              s.eng_eval.size(), out.string().c_str());
  return kOk;
}

int cmd_train(const fs::path& config_path, const std::string& output_dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  const TrainResult r = train(cfg);
  const RunRecord& rec = r.record;
  for (const auto& w : rec.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& e : rec.epochs) {
    std::printf("epoch %zu  mean loss %.4f", e.epoch, e.mean_total);
    if (e.eng) std::printf("  | eng %s", format_report(*e.eng).c_str());
    if (e.tar) std::printf("  | tar %s", format_report(*e.tar).c_str());
    std::printf("\n");
  }
  std::printf("%zu steps in %.1f s\n", rec.steps.size(), rec.wall_seconds);
  if (!rec.checkpoint.empty()) std::printf("checkpoint: %s\n", rec.checkpoint.string().c_str());
  return kOk;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& data, bool as_json) {
  const Predictor p = predictor_from_checkpoint(load_checkpoint(checkpoint));
  const LoadedCorpus corpus = load_corpus(data, "");
  for (const auto& w : corpus.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const MetricsReport report = evaluate(p, corpus.utterances);
  if (as_json) {
    std::cout << json(report).dump(2) << '\n';
  } else {
    std::cout << format_report(report) << '\n';
  }
  return kOk;
}

int cmd_grid(const fs::path& dir, const std::string& out) {
  const GridResult g = run_grid(load_grid_configs(dir));
  std::cout << format_grid_table(g);
  if (!out.empty()) write_json_file(out, g);
  for (const auto& row : g.rows) {
    if (!row.ok) return kRuntime;
  }
  return kOk;
}

int cmd_significance(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
  const SignificanceResult r = z_test_proportions(k1, n1, k2, n2);
  std::cout << json(r).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-lingual alignment trainer"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-corpus", "generate a parallel cipher corpus");
  std::string spec_path, out_dir;
  std::uint64_t seed = 1;
  std::size_t n_train = 200, n_eval = 50;
  gen->add_option("--spec", spec_path, "cipher spec JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--n-per-intent", n_train, "training utterances per intent");
  gen->add_option("--eval-per-intent", n_eval, "evaluation utterances per intent");

  auto* tr = app.add_subcommand("train", "train one configuration");
  std::string config_path, train_out;
  tr->add_option("--config", config_path, "experiment config JSON")->required()->check(CLI::ExistingFile);
  tr->add_option("--output-dir", train_out, "overrides the config's output_dir");

  auto* ev = app.add_subcommand("evaluate", "score a checkpoint on a tagged corpus");
  std::string ckpt_path, data_path;
  bool as_json = false;
  ev->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data_path, "gold corpus JSONL")->required()->check(CLI::ExistingFile);
  ev->add_flag("--json", as_json, "print the full report as JSON");

  auto* gr = app.add_subcommand("grid", "train every config in a directory and rank them");
  std::string grid_dir, grid_out;
  gr->add_option("--configs", grid_dir, "directory of *.json configs")->required()->check(CLI::ExistingDirectory);
  gr->add_option("--out", grid_out, "write the grid as JSON");

  auto* sig = app.add_subcommand("significance", "pooled two-proportion z-test");
  std::size_t k1 = 0, n1 = 0, k2 = 0, n2 = 0;
  sig->add_option("--k1", k1)->required();
  sig->add_option("--n1", n1)->required();
  sig->add_option("--k2", k2)->required();
  sig->add_option("--n2", n2)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) return cmd_gen_corpus(spec_path, out_dir, seed, n_train, n_eval);
    if (*tr) return cmd_train(config_path, train_out);
    if (*ev) return cmd_evaluate(ckpt_path, data_path, as_json);
    if (*gr) return cmd_grid(grid_dir, grid_out);
    if (*sig) return cmd_significance(k1, n1, k2, n2);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training failed: %s\n%s\n", e.what(), e.diagnostic().dump().c_str());
    return kRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kRuntime;
}
