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

#ifndef XALIGN_DATA_HPP_
#define XALIGN_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "xalign/tagging.hpp"
#include "xalign/tensor.hpp"

namespace xalign {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TaggedUtterance {
  std::string id;
  std::string language;
  std::vector<std::string> tokens;
  std::optional<TagSequence> tags;  // absent for unlabelled target data
  std::string intent;

  friend bool operator==(const TaggedUtterance&, const TaggedUtterance&) = default;
};

using Corpus = std::vector<TaggedUtterance>;

void to_json(nlohmann::json& j, const TaggedUtterance& u);

struct LoadedCorpus {
  Corpus utterances;
  std::vector<std::string> warnings;  // BIO repairs, one per affected line
};

// JSON-lines, one utterance per line. Empty lines are skipped. An empty
// expected_language accepts any language code.
LoadedCorpus load_corpus(const std::filesystem::path& path, std::string_view expected_language);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

struct ParallelPair {
  TaggedUtterance eng;
  TaggedUtterance tar;  // tags cleared
};

// Joins target utterances to English ones by id, in English order.
std::vector<ParallelPair> pair_parallel(const Corpus& eng, const Corpus& tar);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kCls = 1;
  static constexpr int kOov = 2;

  Vocab();
  explicit Vocab(std::vector<std::string> tokens);  // id order, reserved entries first

  int id(const std::string& token) const;  // kOov when unknown
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Tokens sorted by (count desc, token asc); tokens seen fewer than
// min_count times map to OOV.
Vocab build_vocab(const std::vector<const Corpus*>& corpora, std::size_t min_count = 1);

// Sorted intent names.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);
  static LabelSet from_corpus(const Corpus& corpus);

  int index_of(const std::string& name) const;
  const std::string& name(int index) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

// Padded token ids of one language: position 0 is CLS, then up to
// seq_len - 1 tokens, then PAD.
struct EncodedBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<int> ids;   // batch x seq_len
  std::vector<int> mask;  // 1 = real token (CLS included)
};

// Number of real (non-CLS) tokens kept for each row.
std::vector<std::size_t> real_lengths(const EncodedBatch& b);

EncodedBatch encode_tokens(const std::vector<const std::vector<std::string>*>& rows,
                           const Vocab& vocab, std::size_t seq_len,
                           std::size_t* truncated = nullptr);

struct ParallelBatch {
  std::vector<std::string> utterance_ids;
  EncodedBatch eng;
  EncodedBatch tar;
  std::vector<int> y_ic;  // batch
  std::vector<int> y_ec;  // batch x seq_len IO indices, kIgnoreIndex at CLS and padding
  Tensor y_ca;            // batch x num_classes presence
};

struct BatchOptions {
  std::size_t seq_len = 24;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool include_outside = true;  // O bit in y_ca
  // Folds a final one-row batch into the batch before it, so that every
  // batch has in-batch negatives.
  bool merge_singleton_tail = false;
};

// Labels come from the English side only. `scheme` must be an IO scheme.
std::vector<ParallelBatch> make_batches(const std::vector<ParallelPair>& pairs, const Vocab& vocab,
                                        const LabelSet& intents, const TagScheme& scheme,
                                        const BatchOptions& options,
                                        std::vector<std::string>* warnings = nullptr);

// Synthetic parallel data: English realised from templates, the target side
// produced by a token cipher plus optional filler insertions.
struct CipherSpec {
  std::string source_language = "en";
  std::string target_language = "xx";
  // intent -> templates; a template token "{type}" is a slot.
  std::map<std::string, std::vector<std::vector<std::string>>> templates;
  // type -> surface forms (space-separated tokens)
  std::map<std::string, std::vector<std::string>> slot_fillers;
  // Source token -> target token. Unlisted tokens pass through unchanged.
  std::map<std::string, std::string> cipher;
  double noise = 0.0;  // per-gap insertion probability
  std::vector<std::string> noise_words;
};

CipherSpec cipher_spec_from_json(const nlohmann::json& j);
nlohmann::json cipher_spec_to_json(const CipherSpec& spec);
CipherSpec load_cipher_spec(const std::filesystem::path& path);

// Throws DataError unless every referenced slot has fillers and the cipher
// is injective over the source vocabulary.
void validate_cipher_spec(const CipherSpec& spec);

std::string cipher_token(const CipherSpec& spec, const std::string& token);
std::string decipher_token(const CipherSpec& spec, const std::string& token);

struct SyntheticCorpus {
  Corpus eng;       // tagged
  Corpus tar;       // untagged
  Corpus tar_gold;  // same utterances as `tar` with gold tags; evaluation only
};

SyntheticCorpus gen_synthetic(const CipherSpec& spec, std::size_t n_per_intent, std::uint64_t seed);

// Train and eval splits drawn from independent streams of one seed. Eval ids
// carry an "eval-" prefix.
struct BenchmarkSplits {
  Corpus eng_train;
  Corpus tar_train;  // untagged
  Corpus eng_eval;
  Corpus tar_eval;  // gold tags
};

BenchmarkSplits gen_benchmark(const CipherSpec& spec, std::size_t train_per_intent,
                              std::size_t eval_per_intent, std::uint64_t seed);

}  // namespace xalign

#endif  // XALIGN_DATA_HPP_
