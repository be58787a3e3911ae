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

#include "xalign/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "xalign/random.hpp"

namespace xalign {

using nlohmann::json;

void to_json(json& j, const TaggedUtterance& u) {
  j = json{{"id", u.id}, {"language", u.language}, {"tokens", u.tokens}};
  if (u.tags) j["tags"] = *u.tags;
  j["intent"] = u.intent;
}

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

template <typename T>
T required(const json& j, const char* key, const std::string& loc) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(loc + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(loc + ": field '" + key + "' has the wrong type");
  }
}

TaggedUtterance parse_utterance(const std::string& text, const std::string& loc,
                                std::vector<std::string>& warnings) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(loc + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw DataError(loc + ": expected a JSON object");

  TaggedUtterance u;
  u.id = required<std::string>(j, "id", loc);
  u.language = required<std::string>(j, "language", loc);
  u.tokens = required<std::vector<std::string>>(j, "tokens", loc);
  u.intent = required<std::string>(j, "intent", loc);
  if (u.intent.empty()) throw DataError(loc + ": empty intent");
  if (auto it = j.find("tags"); it != j.end() && !it->is_null()) {
    auto tags = required<TagSequence>(j, "tags", loc);
    if (tags.size() != u.tokens.size()) {
      throw DataError(loc + ": " + std::to_string(tags.size()) + " tags for " +
                      std::to_string(u.tokens.size()) + " tokens");
    }
    std::size_t repaired = 0;
    try {
      u.tags = repair_bio(tags, &repaired);
    } catch (const TagError& e) {
      throw DataError(loc + ": " + e.what());
    }
    if (repaired) {
      warnings.push_back(loc + ": repaired " + std::to_string(repaired) + " stray I- tag(s) in '" +
                         u.id + "'");
    }
  }
  return u;
}

}  // namespace

LoadedCorpus load_corpus(const std::filesystem::path& path, std::string_view expected_language) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  LoadedCorpus out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string loc = where(path, n);
    TaggedUtterance u = parse_utterance(line, loc, out.warnings);
    if (!expected_language.empty() && u.language != expected_language) {
      throw DataError(loc + ": language '" + u.language + "', expected '" +
                      std::string(expected_language) + "'");
    }
    out.utterances.push_back(std::move(u));
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus " + path.string());
  for (const auto& u : corpus) out << json(u).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<ParallelPair> pair_parallel(const Corpus& eng, const Corpus& tar) {
  std::unordered_map<std::string, const TaggedUtterance*> by_id;
  for (const auto& u : tar) {
    if (!by_id.emplace(u.id, &u).second) throw DataError("duplicate target id '" + u.id + "'");
  }
  std::vector<ParallelPair> pairs;
  pairs.reserve(eng.size());
  std::set<std::string> seen;
  for (const auto& e : eng) {
    if (!seen.insert(e.id).second) throw DataError("duplicate English id '" + e.id + "'");
    auto it = by_id.find(e.id);
    if (it == by_id.end()) throw DataError("no target utterance for id '" + e.id + "'");
    ParallelPair p{e, *it->second};
    p.tar.tags.reset();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{"<pad>", "<cls>", "<oov>"}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 3) throw DataError("vocab needs the three reserved entries");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate vocab token '" + tokens_[i] + "'");
    }
  }
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() || it->second < 3 ? kOov : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocab id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocab build_vocab(const std::vector<const Corpus*>& corpora, std::size_t min_count) {
  if (min_count < 1) throw DataError("min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const Corpus* c : corpora) {
    for (const auto& u : *c) {
      for (const auto& t : u.tokens) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens{"<pad>", "<cls>", "<oov>"};
  for (auto& [tok, n] : kept) {
    // A corpus token spelled like a reserved entry would collide; it maps to OOV.
    if (tok == "<pad>" || tok == "<cls>" || tok == "<oov>") continue;
    tokens.push_back(std::move(tok));
  }
  return Vocab(std::move(tokens));
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate intent '" + names_[i] + "'");
    }
  }
}

LabelSet LabelSet::from_corpus(const Corpus& corpus) {
  std::set<std::string> names;
  for (const auto& u : corpus) names.insert(u.intent);
  return LabelSet(std::vector<std::string>(names.begin(), names.end()));
}

int LabelSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown intent '" + name + "'");
  return it->second;
}

const std::string& LabelSet::name(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= names_.size()) {
    throw std::out_of_range("intent index " + std::to_string(index) + " out of range");
  }
  return names_[static_cast<std::size_t>(index)];
}

std::vector<std::size_t> real_lengths(const EncodedBatch& b) {
  std::vector<std::size_t> out(b.batch, 0);
  for (std::size_t r = 0; r < b.batch; ++r) {
    for (std::size_t s = 1; s < b.seq_len; ++s) out[r] += b.mask[r * b.seq_len + s] ? 1 : 0;
  }
  return out;
}

EncodedBatch encode_tokens(const std::vector<const std::vector<std::string>*>& rows,
                           const Vocab& vocab, std::size_t seq_len, std::size_t* truncated) {
  if (seq_len < 2) throw DataError("seq_len must be at least 2");
  EncodedBatch b;
  b.batch = rows.size();
  b.seq_len = seq_len;
  b.ids.assign(b.batch * seq_len, Vocab::kPad);
  b.mask.assign(b.batch * seq_len, 0);
  std::size_t cut = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& toks = *rows[r];
    const std::size_t n = std::min(toks.size(), seq_len - 1);
    if (n < toks.size()) ++cut;
    int* ids = &b.ids[r * seq_len];
    int* mask = &b.mask[r * seq_len];
    ids[0] = Vocab::kCls;
    mask[0] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      ids[i + 1] = vocab.id(toks[i]);
      mask[i + 1] = 1;
    }
  }
  if (truncated) *truncated = cut;
  return b;
}

std::vector<ParallelBatch> make_batches(const std::vector<ParallelPair>& pairs, const Vocab& vocab,
                                        const LabelSet& intents, const TagScheme& scheme,
                                        const BatchOptions& options,
                                        std::vector<std::string>* warnings) {
  if (options.batch_size == 0) throw DataError("batch_size must be positive");
  if (scheme.mode() != TagScheme::Mode::kIO) throw DataError("make_batches needs an IO tag scheme");

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (options.shuffle) {
    Rng rng(options.seed);
    rng.shuffle(order);
  }

  const std::size_t S = options.seq_len;
  const std::size_t E = scheme.num_classes();
  std::vector<ParallelBatch> batches;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
    ranges.emplace_back(begin, std::min(order.size(), begin + options.batch_size));
  }
  if (options.merge_singleton_tail && ranges.size() > 1 && ranges.back().second - ranges.back().first == 1) {
    ranges[ranges.size() - 2].second = ranges.back().second;
    ranges.pop_back();
  }
  for (const auto& [begin, end] : ranges) {
    const std::size_t B = end - begin;
    std::vector<const std::vector<std::string>*> eng_rows, tar_rows;
    ParallelBatch pb;
    for (std::size_t k = begin; k < end; ++k) {
      const ParallelPair& p = pairs[order[k]];
      if (!p.eng.tags) throw DataError("English utterance '" + p.eng.id + "' has no tags");
      eng_rows.push_back(&p.eng.tokens);
      tar_rows.push_back(&p.tar.tokens);
      pb.utterance_ids.push_back(p.eng.id);
    }
    std::size_t cut_eng = 0, cut_tar = 0;
    pb.eng = encode_tokens(eng_rows, vocab, S, &cut_eng);
    pb.tar = encode_tokens(tar_rows, vocab, S, &cut_tar);
    if (warnings && (cut_eng || cut_tar)) {
      warnings->push_back("truncated " + std::to_string(cut_eng) + " English and " +
                          std::to_string(cut_tar) + " target utterance(s) to " +
                          std::to_string(S - 1) + " tokens");
    }

    pb.y_ic.resize(B);
    pb.y_ec.assign(B * S, kIgnoreIndex);
    std::vector<double> ca(B * E, 0.0);
    for (std::size_t r = 0; r < B; ++r) {
      const ParallelPair& p = pairs[order[begin + r]];
      pb.y_ic[r] = intents.index_of(p.eng.intent);
      const std::vector<int> cls = scheme.encode(bio_to_io(*p.eng.tags));
      const std::size_t n = std::min(cls.size(), S - 1);
      for (std::size_t i = 0; i < n; ++i) pb.y_ec[r * S + i + 1] = cls[i];
      const auto presence =
          transform_labels(std::span<const int>(cls.data(), n), E, options.include_outside);
      std::copy(presence.begin(), presence.end(), ca.begin() + static_cast<std::ptrdiff_t>(r * E));
    }
    pb.y_ca = Tensor({B, E}, std::move(ca));
    batches.push_back(std::move(pb));
  }
  return batches;
}

// ---- synthetic corpus ----

namespace {

bool is_slot(const std::string& tok) {
  return tok.size() > 2 && tok.front() == '{' && tok.back() == '}';
}

std::string slot_type(const std::string& tok) { return tok.substr(1, tok.size() - 2); }

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::set<std::string> source_vocabulary(const CipherSpec& spec) {
  std::set<std::string> words;
  for (const auto& [intent, temps] : spec.templates) {
    for (const auto& t : temps) {
      for (const auto& tok : t) {
        if (!is_slot(tok)) words.insert(tok);
      }
    }
  }
  for (const auto& [type, fillers] : spec.slot_fillers) {
    for (const auto& f : fillers) {
      for (auto& w : split_words(f)) words.insert(std::move(w));
    }
  }
  return words;
}

}  // namespace

CipherSpec cipher_spec_from_json(const json& j) {
  CipherSpec s;
  try {
    s.source_language = j.value("source_language", s.source_language);
    s.target_language = j.value("target_language", s.target_language);
    s.templates = j.at("templates").get<decltype(s.templates)>();
    s.slot_fillers = j.at("slot_fillers").get<decltype(s.slot_fillers)>();
    s.cipher = j.value("cipher", decltype(s.cipher){});
    s.noise = j.value("noise", 0.0);
    s.noise_words = j.value("noise_words", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw DataError(std::string("cipher spec: ") + e.what());
  }
  return s;
}

json cipher_spec_to_json(const CipherSpec& s) {
  return json{{"source_language", s.source_language},
              {"target_language", s.target_language},
              {"templates", s.templates},
              {"slot_fillers", s.slot_fillers},
              {"cipher", s.cipher},
              {"noise", s.noise},
              {"noise_words", s.noise_words}};
}

CipherSpec load_cipher_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cipher spec " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  CipherSpec s = cipher_spec_from_json(j);
  validate_cipher_spec(s);
  return s;
}

void validate_cipher_spec(const CipherSpec& spec) {
  if (spec.templates.empty()) throw DataError("cipher spec has no templates");
  for (const auto& [intent, temps] : spec.templates) {
    if (intent.empty()) throw DataError("cipher spec has an empty intent name");
    if (temps.empty()) throw DataError("intent '" + intent + "' has no templates");
    for (const auto& t : temps) {
      if (t.empty()) throw DataError("intent '" + intent + "' has an empty template");
      for (const auto& tok : t) {
        if (!is_slot(tok)) continue;
        auto it = spec.slot_fillers.find(slot_type(tok));
        if (it == spec.slot_fillers.end() || it->second.empty()) {
          throw DataError("slot type '" + slot_type(tok) + "' has no fillers");
        }
        for (const auto& f : it->second) {
          if (split_words(f).empty()) throw DataError("empty filler for '" + slot_type(tok) + "'");
        }
      }
    }
  }
  if (spec.noise < 0.0 || spec.noise > 1.0) throw DataError("noise must lie in [0, 1]");
  if (spec.noise > 0.0 && spec.noise_words.empty()) {
    throw DataError("noise > 0 needs at least one noise word");
  }
  std::map<std::string, std::string> image;
  for (const auto& w : source_vocabulary(spec)) {
    const std::string c = cipher_token(spec, w);
    auto [it, fresh] = image.emplace(c, w);
    if (!fresh) {
      throw DataError("cipher is not injective: '" + it->second + "' and '" + w + "' both map to '" +
                      c + "'");
    }
  }
  for (const auto& w : spec.noise_words) {
    if (image.count(w)) throw DataError("noise word '" + w + "' is also a cipher output");
  }
}

std::string cipher_token(const CipherSpec& spec, const std::string& token) {
  auto it = spec.cipher.find(token);
  return it == spec.cipher.end() ? token : it->second;
}

std::string decipher_token(const CipherSpec& spec, const std::string& token) {
  for (const auto& [src, dst] : spec.cipher) {
    if (dst == token) return src;
  }
  return token;  // pass-through
}

SyntheticCorpus gen_synthetic(const CipherSpec& spec, std::size_t n_per_intent, std::uint64_t seed) {
  if (n_per_intent < 1) throw DataError("n_per_intent must be at least 1");
  validate_cipher_spec(spec);
  Rng rng(seed);
  SyntheticCorpus out;
  for (const auto& [intent, temps] : spec.templates) {
    for (std::size_t k = 0; k < n_per_intent; ++k) {
      const auto& tmpl = temps[rng.below(temps.size())];
      TaggedUtterance eng;
      eng.id = intent + "-" + std::to_string(k);
      eng.language = spec.source_language;
      eng.intent = intent;
      TagSequence tags;
      for (const auto& tok : tmpl) {
        if (!is_slot(tok)) {
          eng.tokens.push_back(tok);
          tags.push_back("O");
          continue;
        }
        const std::string type = slot_type(tok);
        const auto& fillers = spec.slot_fillers.at(type);
        const auto words = split_words(fillers[rng.below(fillers.size())]);
        for (std::size_t i = 0; i < words.size(); ++i) {
          eng.tokens.push_back(words[i]);
          tags.push_back((i == 0 ? "B-" : "I-") + type);
        }
      }
      eng.tags = tags;

      TaggedUtterance gold;
      gold.id = eng.id;
      gold.language = spec.target_language;
      gold.intent = intent;
      TagSequence gold_tags;
      for (std::size_t i = 0; i < eng.tokens.size(); ++i) {
        gold.tokens.push_back(cipher_token(spec, eng.tokens[i]));
        gold_tags.push_back(tags[i]);
        // Insertions go only where they cannot split an entity.
        const bool inside_next = i + 1 < tags.size() && tags[i + 1].rfind("I-", 0) == 0;
        if (spec.noise > 0.0 && !inside_next && rng.bernoulli(spec.noise)) {
          gold.tokens.push_back(spec.noise_words[rng.below(spec.noise_words.size())]);
          gold_tags.push_back("O");
        }
      }
      gold.tags = gold_tags;

      TaggedUtterance tar = gold;
      tar.tags.reset();
      out.eng.push_back(std::move(eng));
      out.tar.push_back(std::move(tar));
      out.tar_gold.push_back(std::move(gold));
    }
  }
  return out;
}

BenchmarkSplits gen_benchmark(const CipherSpec& spec, std::size_t train_per_intent,
                              std::size_t eval_per_intent, std::uint64_t seed) {
  SyntheticCorpus train = gen_synthetic(spec, train_per_intent, mix_seed(seed, 0));
  SyntheticCorpus eval = gen_synthetic(spec, eval_per_intent, mix_seed(seed, 1));
  for (auto* c : {&eval.eng, &eval.tar_gold}) {
    for (auto& u : *c) u.id = "eval-" + u.id;
  }
  return BenchmarkSplits{std::move(train.eng), std::move(train.tar), std::move(eval.eng),
                         std::move(eval.tar_gold)};
}

}  // namespace xalign
