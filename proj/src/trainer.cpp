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

#include "xalign/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "xalign/random.hpp"

namespace xalign {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- configuration ----

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

fs::path resolve(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  fs::path p = j.at(key).get<std::string>();
  return p.is_relative() ? base / p : p;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    reject_unknown_keys(j,
                        {"name", "encoder", "auxiliaries", "weighting", "epochs", "batch_size",
                         "learning_rate", "seed", "min_count", "include_outside_in_presence",
                         "contrastive_temperature", "source_language", "target_language", "data",
                         "output_dir"},
                        "config");
    c.name = j.value("name", c.name);
    if (j.contains("encoder")) {
      const json& e = j.at("encoder");
      reject_unknown_keys(e, {"hidden_size", "num_layers", "seq_len", "pooling", "kind"}, "encoder");
      c.encoder.hidden_size = e.value("hidden_size", c.encoder.hidden_size);
      c.encoder.num_layers = e.value("num_layers", c.encoder.num_layers);
      c.encoder.seq_len = e.value("seq_len", c.encoder.seq_len);
      c.encoder.pooling = parse_pooling_mode(e.value("pooling", std::string("cls")));
      c.encoder.kind = parse_encoder_kind(e.value("kind", std::string("transformer")));
    }
    std::set<Auxiliary> aux;
    for (const auto& name : j.value("auxiliaries", std::vector<std::string>{})) {
      if (!aux.insert(parse_auxiliary(name)).second) {
        throw ConfigError("auxiliary '" + name + "' listed twice");
      }
    }
    c.auxiliaries.assign(aux.begin(), aux.end());
    c.weighting = parse_weighting_mode(j.value("weighting", std::string("one_plus_one")));
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.min_count = j.value("min_count", c.min_count);
    c.include_outside_in_presence = j.value("include_outside_in_presence", c.include_outside_in_presence);
    c.contrastive_temperature = j.value("contrastive_temperature", c.contrastive_temperature);
    c.source_language = j.value("source_language", c.source_language);
    c.target_language = j.value("target_language", c.target_language);
    if (!j.contains("data")) throw ConfigError("config: missing 'data'");
    const json& d = j.at("data");
    reject_unknown_keys(d, {"eng_train", "tar_train", "eng_eval", "tar_eval"}, "data");
    c.data.eng_train = resolve(d, "eng_train", base_dir);
    c.data.tar_train = resolve(d, "tar_train", base_dir);
    c.data.eng_eval = resolve(d, "eng_eval", base_dir);
    c.data.tar_eval = resolve(d, "tar_eval", base_dir);
    c.output_dir = resolve(j, "output_dir", base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.source = j;
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = parse_experiment_config(j, path.parent_path());
  if (!j.contains("name")) c.name = path.stem().string();
  return c;
}

namespace {

void check_values(const ExperimentConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("config: " + msg);
  };
  need(!c.name.empty(), "name must be nonempty");
  need(c.encoder.hidden_size >= 1, "encoder.hidden_size must be positive");
  need(c.encoder.seq_len >= 2, "encoder.seq_len must be at least 2");
  need(c.epochs >= 1, "epochs must be at least 1");
  need(c.batch_size >= 1, "batch_size must be positive");
  need(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), "learning_rate must be positive");
  need(c.min_count >= 1, "min_count must be at least 1");
  need(c.contrastive_temperature > 0.0, "contrastive_temperature must be positive");
  const bool contrastive =
      std::count(c.auxiliaries.begin(), c.auxiliaries.end(), Auxiliary::kContrastive) > 0;
  need(!contrastive || c.batch_size >= 2, "contrastive needs batch_size >= 2");
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  check_values(c);
  auto exists = [](const fs::path& p, const char* what, bool required) {
    if (p.empty()) {
      if (required) throw ConfigError(std::string("config: data.") + what + " is required");
      return;
    }
    if (!fs::exists(p)) throw ConfigError(std::string("config: data.") + what + " not found: " + p.string());
  };
  exists(c.data.eng_train, "eng_train", true);
  exists(c.data.tar_train, "tar_train", true);
  exists(c.data.eng_eval, "eng_eval", false);
  exists(c.data.tar_eval, "tar_eval", false);
}

TrainingData load_training_data(const ExperimentConfig& c) {
  validate_config(c);
  TrainingData d;
  auto load = [&](const fs::path& p, const std::string& lang) {
    try {
      LoadedCorpus lc = load_corpus(p, lang);
      d.warnings.insert(d.warnings.end(), lc.warnings.begin(), lc.warnings.end());
      return std::move(lc.utterances);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  };
  d.eng_train = load(c.data.eng_train, c.source_language);
  d.tar_train = load(c.data.tar_train, c.target_language);
  if (!c.data.eng_eval.empty()) d.eng_eval = load(c.data.eng_eval, c.source_language);
  if (!c.data.tar_eval.empty()) d.tar_eval = load(c.data.tar_eval, c.target_language);
  return d;
}

// ---- records ----

void to_json(json& j, const StepRecord& s) {
  j = json{{"step", s.step}, {"epoch", s.epoch}, {"l_ic", s.l_ic}, {"l_ec", s.l_ec}, {"aux", s.aux}};
  if (!s.ratios.empty()) j["ratios"] = s.ratios;
  j["weights"] = s.weights;
  if (s.l_ca_eng) j["l_ca_eng"] = *s.l_ca_eng;
  if (s.l_ca_tar) j["l_ca_tar"] = *s.l_ca_tar;
  j["total"] = s.total;
}

void to_json(json& j, const EpochRecord& e) {
  j = json{{"epoch", e.epoch}, {"mean_total", e.mean_total}};
  j["eng"] = e.eng ? json(*e.eng) : json(nullptr);
  j["tar"] = e.tar ? json(*e.tar) : json(nullptr);
}

void to_json(json& j, const RunRecord& r) {
  j = json{{"name", r.name},
           {"config", r.config},
           {"num_steps", r.steps.size()},
           {"epochs", r.epochs},
           {"final_eng", r.final_eng ? json(*r.final_eng) : json(nullptr)},
           {"final_tar", r.final_tar ? json(*r.final_tar) : json(nullptr)},
           {"checkpoint", r.checkpoint.string()},
           {"wall_seconds", r.wall_seconds},
           {"eng_encode_calls", r.eng_encode_calls},
           {"tar_encode_calls", r.tar_encode_calls},
           {"warnings", r.warnings}};
}

// ---- predictor ----

json predictor_metadata(const Predictor& p) {
  return json{{"vocab", p.vocab.tokens()},
              {"intents", p.intents.names()},
              {"entity_types", p.scheme.entity_types()}};
}

Predictor predictor_from_checkpoint(const Checkpoint& ckpt) {
  try {
    const json& m = ckpt.metadata;
    Predictor p{ckpt.params, Vocab(m.at("vocab").get<std::vector<std::string>>()),
                LabelSet(m.at("intents").get<std::vector<std::string>>()),
                TagScheme(m.at("entity_types").get<std::vector<std::string>>(), TagScheme::Mode::kIO)};
    const EncoderConfig& c = p.params.config();
    if (c.vocab_size != p.vocab.size() || c.num_intents != p.intents.size() ||
        c.num_entity_classes != p.scheme.num_classes()) {
      throw ConfigError("checkpoint metadata does not match its model config");
    }
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint metadata: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("checkpoint metadata: ") + e.what());
  }
}

// ---- optimisation ----

void sgd_step(ModelParams& params, const std::vector<Tensor>& grads, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: learning rate must be positive");
  if (grads.size() != params.size()) throw std::invalid_argument("sgd_step: gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params.tensor(i).shape()) {
      throw std::invalid_argument("sgd_step: gradient shape mismatch for " + params.name(i));
    }
    if (!grads[i].all_finite()) throw std::domain_error("sgd_step: non-finite gradient for " + params.name(i));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto p = params.tensor(i).data();
    const auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

// ---- prediction and evaluation ----

namespace {

int argmax(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (row[k] > row[best]) best = k;
  }
  return static_cast<int>(best);
}

}  // namespace

Predictions predict(const Predictor& predictor, const Corpus& corpus, std::size_t batch_size) {
  const EncoderConfig& c = predictor.params.config();
  const std::size_t S = c.seq_len, E = c.num_entity_classes, I = c.num_intents;
  Predictions out;
  for (std::size_t begin = 0; begin < corpus.size(); begin += batch_size) {
    const std::size_t end = std::min(corpus.size(), begin + batch_size);
    std::vector<const std::vector<std::string>*> rows;
    for (std::size_t k = begin; k < end; ++k) rows.push_back(&corpus[k].tokens);
    const EncodedBatch b = encode_tokens(rows, predictor.vocab, S);
    Graph g;
    BoundParams p(g, predictor.params, false);
    const EncoderOutput enc = encode(p, b.ids, b.mask, b.batch);
    const Tensor& ic = intent_logits(p, enc.cls).value();
    const Tensor& ec = entity_logits(p, enc.tokens).value();
    for (std::size_t r = 0; r < b.batch; ++r) {
      out.intents.push_back(argmax(&ic.values()[r * I], I));
      const std::size_t n = rows[r]->size();
      TagSequence tags(n, "O");
      for (std::size_t i = 0; i < std::min(n, S - 1); ++i) {
        tags[i] = predictor.scheme.tag_of(argmax(&ec.values()[(r * S + i + 1) * E], E));
      }
      out.io_tags.push_back(std::move(tags));
    }
  }
  return out;
}

MetricsReport evaluate(const Predictor& predictor, const Corpus& gold) {
  if (gold.empty()) throw ConfigError("evaluate: empty corpus");
  const auto& known = predictor.scheme.entity_types();
  std::vector<int> gold_intents;
  std::vector<TagSequence> gold_tags;
  for (const auto& u : gold) {
    if (!u.tags) throw ConfigError("evaluate: utterance '" + u.id + "' has no gold tags");
    for (const auto& t : *u.tags) {
      const Tag tag = parse_tag(t);
      if (tag.prefix != TagPrefix::kOutside && std::find(known.begin(), known.end(), tag.type) == known.end()) {
        throw ConfigError("evaluate: entity type '" + tag.type + "' is not in the model's tag scheme");
      }
    }
    const auto& names = predictor.intents.names();
    const auto it = std::find(names.begin(), names.end(), u.intent);
    gold_intents.push_back(it == names.end() ? -1 : static_cast<int>(it - names.begin()));
    gold_tags.push_back(*u.tags);
  }
  const Predictions pred = predict(predictor, gold);
  return make_report(pred.intents, gold_intents, pred.io_tags, gold_tags);
}

// ---- training ----

namespace {

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::ofstream out(path);
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

bool has(const ExperimentConfig& c, Auxiliary a) {
  return std::find(c.auxiliaries.begin(), c.auxiliaries.end(), a) != c.auxiliaries.end();
}

json diagnostic(const StepRecord& s, const ParallelBatch& b, const std::string& what) {
  return json{{"error", what}, {"step", s.step}, {"epoch", s.epoch}, {"l_ic", s.l_ic},
              {"l_ec", s.l_ec}, {"aux", s.aux}, {"batch_ids", b.utterance_ids}};
}

}  // namespace

TrainResult train(const ExperimentConfig& config, const TrainingData& data) {
  const auto t0 = std::chrono::steady_clock::now();
  check_values(config);
  if (data.eng_train.empty()) throw ConfigError("no English training data");
  for (const auto& u : data.eng_train) {
    if (!u.tags) throw ConfigError("English training utterance '" + u.id + "' has no tags");
  }

  RunRecord rec;
  rec.name = config.name;
  rec.config = config.source;
  rec.warnings = data.warnings;

  std::vector<ParallelPair> pairs;
  try {
    pairs = pair_parallel(data.eng_train, data.tar_train);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  std::vector<TagSequence> eng_tags;
  for (const auto& u : data.eng_train) eng_tags.push_back(*u.tags);

  Predictor pred{ModelParams{}, build_vocab({&data.eng_train, &data.tar_train}, config.min_count),
                 LabelSet::from_corpus(data.eng_train),
                 TagScheme::from_sequences(eng_tags, TagScheme::Mode::kIO)};
  EncoderConfig enc = config.encoder;
  enc.vocab_size = pred.vocab.size();
  enc.num_intents = pred.intents.size();
  enc.num_entity_classes = pred.scheme.num_classes();
  try {
    enc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (has(config, Auxiliary::kContrastive) && pairs.size() < 2) {
    throw ConfigError("contrastive needs at least two training pairs");
  }
  pred.params = init_model(enc, mix_seed(config.seed, 0));

  const bool use_target = !config.auxiliaries.empty();
  CoVState cov;
  std::vector<json> step_rows, weight_rows;
  const std::size_t S = enc.seq_len;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    BatchOptions opt;
    opt.seq_len = S;
    opt.batch_size = config.batch_size;
    opt.seed = mix_seed(config.seed, epoch);
    opt.include_outside = config.include_outside_in_presence;
    opt.merge_singleton_tail = true;
    std::vector<std::string> batch_warnings;
    const auto batches = make_batches(pairs, pred.vocab, pred.intents, pred.scheme, opt, &batch_warnings);
    if (epoch == 1) rec.warnings.insert(rec.warnings.end(), batch_warnings.begin(), batch_warnings.end());

    double epoch_total = 0.0;
    for (const ParallelBatch& batch : batches) {
      ++step;
      Graph g;
      BoundParams p(g, pred.params);
      const std::size_t B = batch.eng.batch;

      const EncoderOutput eng = encode(p, batch.eng.ids, batch.eng.mask, B);
      ++rec.eng_encode_calls;
      const Var ic = intent_logits(p, eng.cls);
      const Var ec = entity_logits(p, eng.tokens);
      const TaskLosses task = task_loss(ic, ec, batch.y_ic, batch.y_ec);

      LossBundle losses{task.l_ic, task.l_ec, {}, std::nullopt};
      if (use_target) {
        const EncoderOutput tar = encode(p, batch.tar.ids, batch.tar.mask, B);
        ++rec.tar_encode_calls;
        for (Auxiliary a : config.auxiliaries) {
          switch (a) {
            case Auxiliary::kCrossAligner: {
              const auto ca = crossaligner_loss(p, ec, entity_logits(p, tar.tokens), batch.y_ca);
              losses.crossaligner = ca;
              losses.aux["crossaligner"] = add(ca.l_eng, ca.l_tar);
              break;
            }
            case Auxiliary::kXeroAlign:
              losses.aux["xeroalign"] = xeroalign_loss(eng.cls, tar.cls);
              break;
            case Auxiliary::kContrastive:
              losses.aux["contrastive"] =
                  contrastive_loss(eng.cls, tar.cls, config.contrastive_temperature);
              break;
            case Auxiliary::kTranslateIntent:
              losses.aux["translate_intent"] = translate_intent_loss(intent_logits(p, tar.cls), batch.y_ic);
              break;
          }
        }
      }

      StepRecord s;
      s.step = step;
      s.epoch = epoch;
      s.l_ic = losses.l_ic.value().item();
      s.l_ec = losses.l_ec.value().item();
      s.aux = losses.aux_values();
      if (losses.crossaligner) {
        s.l_ca_eng = losses.crossaligner->l_eng.value().item();
        s.l_ca_tar = losses.crossaligner->l_tar.value().item();
      }
      try {
        losses.validate();
      } catch (const std::domain_error& e) {
        throw TrainingError(std::string("step ") + std::to_string(step) + ": " + e.what(),
                            diagnostic(s, batch, e.what()));
      }

      if (config.weighting == WeightingMode::kCov) {
        s.weights = cov_update(cov, s.aux);
        for (const auto& [name, tr] : cov.tracks) s.ratios[name] = tr.ratio;
      } else {
        for (const auto& [name, v] : s.aux) s.weights[name] = 1.0;
      }
      const Var total = combine_total(losses.l_ic, losses.l_ec, losses.aux, config.weighting, s.weights);
      s.total = total.value().item();

      const Gradients grads = g.backward(total);
      std::vector<Tensor> gvec;
      gvec.reserve(p.vars().size());
      for (const Var& v : p.vars()) gvec.push_back(grads.of(v));
      try {
        sgd_step(pred.params, gvec, config.learning_rate);
      } catch (const std::domain_error& e) {
        throw TrainingError(std::string("step ") + std::to_string(step) + ": " + e.what(),
                            diagnostic(s, batch, e.what()));
      }

      epoch_total += s.total;
      if (!config.output_dir.empty()) {
        step_rows.push_back(s);
        for (const auto& [name, raw] : s.aux) {
          json w{{"step", step}, {"name", name}, {"raw_loss", raw}, {"weight", s.weights.at(name)}};
          w["ratio"] = s.ratios.count(name) ? json(s.ratios.at(name)) : json(nullptr);
          weight_rows.push_back(std::move(w));
        }
      }
      rec.steps.push_back(std::move(s));
    }

    EpochRecord er;
    er.epoch = epoch;
    er.mean_total = epoch_total / static_cast<double>(batches.size());
    if (data.eng_eval) er.eng = evaluate(pred, *data.eng_eval);
    if (data.tar_eval) er.tar = evaluate(pred, *data.tar_eval);
    rec.epochs.push_back(er);
  }
  rec.final_eng = rec.epochs.back().eng;
  rec.final_tar = rec.epochs.back().tar;
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!config.output_dir.empty()) {
    fs::create_directories(config.output_dir);
    rec.checkpoint = config.output_dir / "checkpoint.json";
    save_checkpoint(rec.checkpoint, Checkpoint{pred.params, predictor_metadata(pred)});
    write_jsonl(config.output_dir / "steps.jsonl", step_rows);
    write_jsonl(config.output_dir / "weights.jsonl", weight_rows);
    write_json(config.output_dir / "metrics.json",
               json{{"eng", rec.final_eng ? json(*rec.final_eng) : json(nullptr)},
                    {"tar", rec.final_tar ? json(*rec.final_tar) : json(nullptr)}});
    write_json(config.output_dir / "run.json", rec);
  }
  return TrainResult{std::move(rec), std::move(pred)};
}

TrainResult train(const ExperimentConfig& config) {
  const TrainingData data = load_training_data(config);
  try {
    return train(config, data);
  } catch (const TrainingError& e) {
    if (!config.output_dir.empty()) {
      fs::create_directories(config.output_dir);
      write_json(config.output_dir / "diagnostic.json", e.diagnostic());
    }
    throw;
  }
}

// ---- grid ----

namespace {

double rank_key(const GridRow& r) {
  if (!r.ok) return -1.0;
  if (r.record.final_tar) return r.record.final_tar->overall;
  return r.record.final_eng ? r.record.final_eng->overall : 0.0;
}

}  // namespace

GridResult run_grid(const std::vector<ExperimentConfig>& configs) {
  GridResult grid;
  for (const auto& c : configs) {
    GridRow row;
    row.name = c.name;
    try {
      row.record = train(c).record;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    grid.rows.push_back(std::move(row));
  }
  std::stable_sort(grid.rows.begin(), grid.rows.end(),
                   [](const GridRow& a, const GridRow& b) { return rank_key(a) > rank_key(b); });
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.rows.size(); ++j) {
      const auto& a = grid.rows[i];
      const auto& b = grid.rows[j];
      if (!a.ok || !b.ok || !a.record.final_tar || !b.record.final_tar) continue;
      PairwiseTest t;
      t.a = a.name;
      t.b = b.name;
      t.k1 = a.record.final_tar->counts.n_intents_correct;
      t.n1 = a.record.final_tar->counts.n_intents_total;
      t.k2 = b.record.final_tar->counts.n_intents_correct;
      t.n2 = b.record.final_tar->counts.n_intents_total;
      t.result = z_test_proportions(t.k1, t.n1, t.k2, t.n2);
      grid.tests.push_back(std::move(t));
    }
  }
  return grid;
}

std::vector<ExperimentConfig> load_grid_configs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no *.json configs in " + dir.string());
  std::vector<ExperimentConfig> out;
  for (const auto& f : files) out.push_back(load_experiment_config(f));
  return out;
}

std::string format_grid_table(const GridResult& grid) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-36s %8s %8s %8s %8s %8s\n", "rank", "config", "tar acc",
                "tar F", "tar ovl", "eng ovl", "secs");
  out << line;
  std::size_t rank = 0;
  for (const auto& r : grid.rows) {
    ++rank;
    if (!r.ok) {
      std::snprintf(line, sizeof line, "%-4zu %-36s FAILED: ", rank, r.name.c_str());
      out << line << r.error << '\n';
      continue;
    }
    auto pct = [](const std::optional<MetricsReport>& m, double MetricsReport::*f) {
      return m ? 100.0 * ((*m).*f) : NAN;
    };
    std::snprintf(line, sizeof line, "%-4zu %-36s %8.1f %8.1f %8.1f %8.1f %8.1f\n", rank, r.name.c_str(),
                  pct(r.record.final_tar, &MetricsReport::intent_accuracy),
                  pct(r.record.final_tar, &MetricsReport::entity_f1),
                  pct(r.record.final_tar, &MetricsReport::overall),
                  pct(r.record.final_eng, &MetricsReport::overall), r.record.wall_seconds);
    out << line;
  }
  if (!grid.tests.empty()) {
    out << "\npairwise z-tests on target intent accuracy\n";
    for (const auto& t : grid.tests) {
      std::snprintf(line, sizeof line, "%-28s vs %-28s z %7.3f  p %.4f%s\n", t.a.c_str(), t.b.c_str(),
                    t.result.z, t.result.p_two_tailed,
                    !t.result.defined ? "  (undefined)" : t.result.significant_at.at(0.05) ? "  *" : "");
      out << line;
    }
  }
  return out.str();
}

void to_json(json& j, const GridResult& g) {
  j = json::object();
  json rows = json::array();
  for (const auto& r : g.rows) {
    json row{{"name", r.name}, {"ok", r.ok}};
    if (r.ok) {
      row["record"] = r.record;
    } else {
      row["error"] = r.error;
    }
    rows.push_back(std::move(row));
  }
  json tests = json::array();
  for (const auto& t : g.tests) {
    tests.push_back({{"a", t.a}, {"b", t.b}, {"k1", t.k1}, {"n1", t.n1}, {"k2", t.k2}, {"n2", t.n2},
                     {"proportion", "target intent accuracy"}, {"result", t.result}});
  }
  j["rows"] = std::move(rows);
  j["tests"] = std::move(tests);
}

}  // namespace xalign
