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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "support/generators.hpp"
#include "support/temp_dir.hpp"
#include "xalign/data.hpp"

using namespace xalign;
using xalign::testing::TempDir;

namespace {

TaggedUtterance utt(std::string id, std::vector<std::string> tokens,
                    std::optional<TagSequence> tags, std::string intent, std::string lang = "en") {
  return {std::move(id), std::move(lang), std::move(tokens), std::move(tags), std::move(intent)};
}

Corpus small_corpus() {
  return {utt("u1", {"fly", "to", "new", "york"}, TagSequence{"O", "O", "B-city", "I-city"}, "flight"),
          utt("u2", {"play", "jazz"}, TagSequence{"O", "B-item"}, "music"),
          utt("u3", {"wake", "me", "at", "noon"}, TagSequence{"O", "O", "O", "B-time"}, "alarm")};
}

CipherSpec tiny_spec() {
  CipherSpec s;
  s.templates["greet"] = {{"hello", "{name}"}, {"hi", "{name}", "today"}};
  s.templates["leave"] = {{"bye", "{name}"}};
  s.slot_fillers["name"] = {"ann", "bob lee"};
  s.cipher = {{"hello", "olleh"}, {"hi", "ih"}, {"today", "yadot"}, {"bye", "eyb"}, {"bob", "bab"}};
  return s;
}

}  // namespace

TEST_CASE("load_corpus examples") {
  TempDir dir;
  CHECK(load_corpus(dir.write("empty.jsonl", ""), "en").utterances.empty());

  const auto bad_len = dir.write(
      "bad.jsonl", R"({"id":"a","language":"en","tokens":["x"],"tags":["O"],"intent":"i"}
{"id":"b","language":"en","tokens":["x","y"],"tags":["O"],"intent":"i"}
)");
  try {
    load_corpus(bad_len, "en");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("bad.jsonl:2") != std::string::npos);
  }

  const auto malformed = dir.write("m.jsonl", "{\"id\": \n");
  CHECK_THROWS_AS(load_corpus(malformed, ""), DataError);
  const auto fr = dir.write("fr.jsonl", R"({"id":"a","language":"fr","tokens":["x"],"intent":"i"})");
  CHECK_THROWS_AS(load_corpus(fr, "en"), DataError);
  CHECK(load_corpus(fr, "fr").utterances.size() == 1);
  const auto no_intent = dir.write("n.jsonl", R"({"id":"a","language":"en","tokens":["x"],"intent":""})");
  CHECK_THROWS_AS(load_corpus(no_intent, "en"), DataError);
  CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl", "en"), DataError);
}

TEST_CASE("stray I- tags are repaired with a warning") {
  TempDir dir;
  const auto p = dir.write(
      "r.jsonl", R"({"id":"a","language":"en","tokens":["x","y"],"tags":["O","I-city"],"intent":"i"})");
  const auto loaded = load_corpus(p, "en");
  CHECK(*loaded.utterances[0].tags == TagSequence{"O", "B-city"});
  REQUIRE(loaded.warnings.size() == 1);
  CHECK(loaded.warnings[0].find("r.jsonl:1") != std::string::npos);
}

TEST_CASE("save then load is the identity") {
  TempDir dir;
  Corpus c = small_corpus();
  c.push_back(utt("u4", {"x"}, std::nullopt, "music", "xx"));
  save_corpus(dir / "c.jsonl", c);
  CHECK(load_corpus(dir / "c.jsonl", "").utterances == c);
}

TEST_CASE("pair_parallel") {
  const Corpus eng = small_corpus();
  auto pairs = pair_parallel(eng, eng);
  REQUIRE(pairs.size() == 3);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].eng == eng[i]);
    CHECK(pairs[i].tar.tokens == eng[i].tokens);
    CHECK_FALSE(pairs[i].tar.tags.has_value());
  }

  Corpus shuffled = eng;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto again = pair_parallel(eng, shuffled);
  for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(again[i].tar.id == pairs[i].tar.id);

  Corpus missing = eng;
  missing.pop_back();
  try {
    pair_parallel(eng, missing);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("u3") != std::string::npos);
  }
  Corpus dup = eng;
  dup.push_back(eng[0]);
  CHECK_THROWS_AS(pair_parallel(eng, dup), DataError);
}

TEST_CASE("build_vocab ordering and threshold") {
  const Corpus c{utt("a", {"a", "a", "b"}, std::nullopt, "i")};
  const Vocab v = build_vocab({&c}, 1);
  CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<cls>", "<oov>", "a", "b"});
  CHECK(v.id("a") == 3);
  CHECK(v.id("b") == 4);
  CHECK(v.id("zzz") == Vocab::kOov);
  CHECK(v.id("<pad>") == Vocab::kOov);

  const Vocab v2 = build_vocab({&c}, 2);
  CHECK(v2.id("b") == Vocab::kOov);
  CHECK(v2.size() == 4);
  CHECK(build_vocab({&c}, 1) == v);
  CHECK_THROWS_AS(build_vocab({&c}, 0), DataError);

  // Ties break alphabetically; every language is covered.
  const Corpus x{utt("b", {"z", "y", "x"}, std::nullopt, "i", "xx")};
  const Vocab v3 = build_vocab({&c, &x}, 1);
  CHECK(v3.tokens() == std::vector<std::string>{"<pad>", "<cls>", "<oov>", "a", "b", "x", "y", "z"});
}

TEST_CASE("make_batches examples") {
  const Corpus eng = small_corpus();
  const auto pairs = pair_parallel(eng, eng);
  const Vocab vocab = build_vocab({&eng}, 1);
  const LabelSet intents = LabelSet::from_corpus(eng);
  const TagScheme scheme({"city", "item", "time"});
  BatchOptions opt;
  opt.seq_len = 6;
  opt.batch_size = 10;
  opt.seed = 3;

  const auto one = make_batches(pairs, vocab, intents, scheme, opt);
  REQUIRE(one.size() == 1);
  CHECK(one[0].eng.batch == 3);

  opt.batch_size = 2;
  const auto a = make_batches(pairs, vocab, intents, scheme, opt);
  const auto b = make_batches(pairs, vocab, intents, scheme, opt);
  REQUIRE(a.size() == 2);
  CHECK(a[0].utterance_ids == b[0].utterance_ids);
  CHECK(a[1].utterance_ids == b[1].utterance_ids);
  CHECK(a[1].eng.batch == 1);

  opt.shuffle = false;
  const auto ordered = make_batches(pairs, vocab, intents, scheme, opt);
  CHECK(ordered[0].utterance_ids == std::vector<std::string>{"u1", "u2"});

  // Row 0 of the unshuffled batch is u1.
  const auto& pb = ordered[0];
  CHECK(pb.eng.ids[0] == Vocab::kCls);
  CHECK(pb.y_ec[0] == kIgnoreIndex);
  CHECK(pb.y_ec[1] == 0);
  CHECK(pb.y_ec[3] == scheme.index_of("I-city"));
  CHECK(pb.y_ec[5] == kIgnoreIndex);
  CHECK(pb.y_ic[0] == intents.index_of("flight"));
  const std::vector<int> cls = scheme.encode(bio_to_io(*eng[0].tags));
  const auto expect = transform_labels(cls, scheme.num_classes());
  for (std::size_t k = 0; k < expect.size(); ++k) CHECK(pb.y_ca.at(0, k) == expect[k]);

  CHECK_THROWS_AS(make_batches(pairs, vocab, intents, TagScheme({"city"}, TagScheme::Mode::kBIO), opt),
                  DataError);
}

TEST_CASE("a one-row tail can be merged into the previous batch") {
  const Corpus eng = small_corpus();
  const auto pairs = pair_parallel(eng, eng);
  BatchOptions opt;
  opt.batch_size = 2;
  opt.seq_len = 6;
  const Vocab vocab = build_vocab({&eng});
  const LabelSet intents = LabelSet::from_corpus(eng);
  const TagScheme scheme({"city", "item", "time"});
  CHECK(make_batches(pairs, vocab, intents, scheme, opt).size() == 2);
  opt.merge_singleton_tail = true;
  const auto merged = make_batches(pairs, vocab, intents, scheme, opt);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].eng.batch == 3);
  CHECK(merged[0].y_ca.shape() == Shape{3, 4});
}

TEST_CASE("long utterances are truncated with a warning") {
  Corpus eng{utt("long", {"a", "b", "c", "d", "e"}, TagSequence{"O", "O", "O", "O", "B-x"}, "i")};
  const auto pairs = pair_parallel(eng, eng);
  BatchOptions opt;
  opt.seq_len = 4;
  std::vector<std::string> warnings;
  const auto batches =
      make_batches(pairs, build_vocab({&eng}), LabelSet::from_corpus(eng), TagScheme({"x"}), opt, &warnings);
  CHECK(warnings.size() == 1);
  CHECK(real_lengths(batches[0].eng) == std::vector<std::size_t>{3});
  // The dropped entity does not count towards presence.
  CHECK(batches[0].y_ca.at(0, 1) == 0.0);
}

TEST_CASE("batch invariants on generated corpora") {
  std::mt19937_64 rng(21);
  const TagScheme scheme(testing::entity_types());
  for (int trial = 0; trial < 30; ++trial) {
    Corpus eng, tar;
    const std::size_t n = 1 + testing::pick(rng, 40);
    for (std::size_t i = 0; i < n; ++i) {
      TagSequence tags = testing::random_bio_without_adjacent(rng, 12);
      std::vector<std::string> toks;
      for (std::size_t k = 0; k < tags.size(); ++k) toks.push_back("w" + std::to_string(testing::pick(rng, 30)));
      const std::string intent = "i" + std::to_string(testing::pick(rng, 4));
      eng.push_back(utt("id" + std::to_string(i), toks, tags, intent));
      std::vector<std::string> ttoks;
      for (const auto& t : toks) ttoks.push_back("t" + t);
      if (testing::pick(rng, 2)) ttoks.push_back("filler");
      tar.push_back(utt("id" + std::to_string(i), ttoks, std::nullopt, intent, "xx"));
    }
    const auto pairs = pair_parallel(eng, tar);
    const Vocab vocab = build_vocab({&eng, &tar});
    const LabelSet intents = LabelSet::from_corpus(eng);
    BatchOptions opt;
    opt.seq_len = 16;
    opt.batch_size = 1 + testing::pick(rng, 8);
    opt.seed = trial;

    std::map<std::string, const TaggedUtterance*> by_id;
    for (const auto& u : eng) by_id[u.id] = &u;
    std::size_t seen = 0;
    for (const auto& pb : make_batches(pairs, vocab, intents, scheme, opt)) {
      for (const EncodedBatch* side : {&pb.eng, &pb.tar}) {
        for (std::size_t k = 0; k < side->ids.size(); ++k) {
          CHECK((side->mask[k] == 0) == (side->ids[k] == Vocab::kPad));
          if (side == &pb.eng && side->mask[k] == 0) CHECK(pb.y_ec[k] == kIgnoreIndex);
        }
      }
      // De-pad and de-index to recover the English record.
      for (std::size_t r = 0; r < pb.eng.batch; ++r) {
        const TaggedUtterance& src = *by_id.at(pb.utterance_ids[r]);
        std::vector<std::string> toks;
        std::vector<int> tag_ids;
        for (std::size_t s = 1; s < opt.seq_len && pb.eng.mask[r * opt.seq_len + s]; ++s) {
          toks.push_back(vocab.token(pb.eng.ids[r * opt.seq_len + s]));
          tag_ids.push_back(pb.y_ec[r * opt.seq_len + s]);
        }
        CHECK(toks == src.tokens);
        CHECK(restore_b_tags(scheme.decode(tag_ids)) == *src.tags);
        CHECK(intents.name(pb.y_ic[r]) == src.intent);
        ++seen;
      }
    }
    CHECK(seen == eng.size());
  }
}

TEST_CASE("target labels never reach a training batch") {
  Corpus eng = small_corpus();
  Corpus tar = eng;
  for (auto& u : tar) u.language = "xx";
  Corpus poisoned = tar;
  for (auto& u : poisoned) {
    u.tags = TagSequence(u.tokens.size(), "B-item");
    u.intent = "music";
  }
  const Vocab vocab = build_vocab({&eng, &tar});
  const LabelSet intents = LabelSet::from_corpus(eng);
  const TagScheme scheme({"city", "item", "time"});
  BatchOptions opt;
  opt.seq_len = 8;
  opt.batch_size = 2;
  const auto clean = make_batches(pair_parallel(eng, tar), vocab, intents, scheme, opt);
  const auto dirty = make_batches(pair_parallel(eng, poisoned), vocab, intents, scheme, opt);
  REQUIRE(clean.size() == dirty.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(clean[i].tar.ids == dirty[i].tar.ids);
    CHECK(clean[i].y_ic == dirty[i].y_ic);
    CHECK(clean[i].y_ec == dirty[i].y_ec);
    CHECK(clean[i].y_ca == dirty[i].y_ca);
  }
}

TEST_CASE("cipher spec validation") {
  CipherSpec s = tiny_spec();
  CHECK_NOTHROW(validate_cipher_spec(s));
  s.cipher["hi"] = "olleh";
  CHECK_THROWS_AS(validate_cipher_spec(s), DataError);
  s = tiny_spec();
  s.cipher["hello"] = "ann";  // collides with the pass-through filler
  CHECK_THROWS_AS(validate_cipher_spec(s), DataError);
  s = tiny_spec();
  s.slot_fillers["name"].clear();
  CHECK_THROWS_AS(validate_cipher_spec(s), DataError);
  CHECK_THROWS_AS(gen_synthetic(s, 3, 1), DataError);
  s = tiny_spec();
  s.templates["greet"].push_back({"{unknown}"});
  CHECK_THROWS_AS(validate_cipher_spec(s), DataError);
  s = tiny_spec();
  s.noise = 0.5;
  CHECK_THROWS_AS(validate_cipher_spec(s), DataError);
  s.noise_words = {"ih"};
  CHECK_THROWS_AS(validate_cipher_spec(s), DataError);
  s.noise_words = {"um"};
  CHECK_NOTHROW(validate_cipher_spec(s));
  CHECK(cipher_spec_from_json(cipher_spec_to_json(s)).cipher == s.cipher);
}

TEST_CASE("gen_synthetic examples") {
  const CipherSpec s = tiny_spec();
  const auto a = gen_synthetic(s, 20, 5);
  const auto b = gen_synthetic(s, 20, 5);
  CHECK(a.eng == b.eng);
  CHECK(a.tar == b.tar);
  CHECK(a.tar_gold == b.tar_gold);
  CHECK(a.eng.size() == 40);
  CHECK_THROWS_AS(gen_synthetic(s, 0, 5), DataError);

  for (std::size_t i = 0; i < a.eng.size(); ++i) {
    const auto& e = a.eng[i];
    const auto& t = a.tar[i];
    CHECK(e.id == t.id);
    CHECK(e.language == "en");
    CHECK(t.language == "xx");
    CHECK_FALSE(t.tags.has_value());
    CHECK(validate_bio(*e.tags).empty());
    REQUIRE(t.tokens.size() == e.tokens.size());
    for (std::size_t k = 0; k < t.tokens.size(); ++k) CHECK(decipher_token(s, t.tokens[k]) == e.tokens[k]);
    CHECK(*a.tar_gold[i].tags == *e.tags);
  }
}

TEST_CASE("noise insertions keep entities intact") {
  CipherSpec s = tiny_spec();
  s.noise = 0.6;
  s.noise_words = {"um", "er"};
  const auto c = gen_synthetic(s, 200, 9);
  bool grew = false;
  for (std::size_t i = 0; i < c.eng.size(); ++i) {
    const auto& gold = c.tar_gold[i];
    grew = grew || gold.tokens.size() > c.eng[i].tokens.size();
    std::vector<std::string> kept;
    TagSequence kept_tags;
    for (std::size_t k = 0; k < gold.tokens.size(); ++k) {
      const bool noise = gold.tokens[k] == "um" || gold.tokens[k] == "er";
      if (noise) {
        CHECK((*gold.tags)[k] == "O");
        continue;
      }
      kept.push_back(decipher_token(s, gold.tokens[k]));
      kept_tags.push_back((*gold.tags)[k]);
    }
    CHECK(kept == c.eng[i].tokens);
    CHECK(kept_tags == *c.eng[i].tags);
    CHECK(extract_spans(*gold.tags).size() == extract_spans(*c.eng[i].tags).size());
  }
  CHECK(grew);
}

TEST_CASE("shipped benchmark spec is valid and large enough") {
  const CipherSpec s = load_cipher_spec(testing::source_dir() / "data" / "cipher_spec.json");
  CHECK(s.templates.size() >= 5);
  CHECK(s.slot_fillers.size() >= 4);
  const auto c = gen_synthetic(s, 10, 1);
  std::set<std::string> types;
  for (const auto& u : c.eng) {
    for (const auto& sp : extract_spans(*u.tags)) types.insert(sp.type);
  }
  CHECK(types.size() >= 4);
}
