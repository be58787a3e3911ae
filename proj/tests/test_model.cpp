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

#include <cstring>

#include "support/temp_dir.hpp"
#include "xalign/model.hpp"

using namespace xalign;

namespace {

EncoderConfig small_config(EncoderKind kind = EncoderKind::kTransformer,
                           PoolingMode pooling = PoolingMode::kCls) {
  EncoderConfig c;
  c.vocab_size = 12;
  c.hidden_size = 6;
  c.num_layers = 2;
  c.seq_len = 5;
  c.num_intents = 3;
  c.num_entity_classes = 4;
  c.kind = kind;
  c.pooling = pooling;
  return c;
}

struct Input {
  std::vector<int> ids, mask;
  std::size_t batch;
};

// Two examples: lengths 4 and 2 (CLS included).
Input two_examples() {
  return {{1, 4, 7, 3, 0, 1, 9, 0, 0, 0}, {1, 1, 1, 1, 0, 1, 1, 0, 0, 0}, 2};
}

std::vector<double> row(const Tensor& t, std::size_t r, std::size_t width) {
  return {t.values().begin() + static_cast<std::ptrdiff_t>(r * width),
          t.values().begin() + static_cast<std::ptrdiff_t>((r + 1) * width)};
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.values().data(), b.values().data(), a.numel() * sizeof(double)) == 0;
}

const EncoderKind kKinds[] = {EncoderKind::kTransformer, EncoderKind::kBag};

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.seq_len = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.num_entity_classes = 1;
  CHECK_THROWS_AS(init_model(c, 1), std::invalid_argument);
  c = small_config();
  const nlohmann::json j = c;
  CHECK(j.get<EncoderConfig>() == c);
  CHECK(parse_pooling_mode("mean") == PoolingMode::kMean);
  CHECK_THROWS_AS(parse_encoder_kind("lstm"), std::invalid_argument);
}

TEST_CASE("init_model examples") {
  for (EncoderKind kind : kKinds) {
    const EncoderConfig c = small_config(kind);
    const ModelParams a = init_model(c, 1);
    CHECK(a == init_model(c, 1));
    CHECK_FALSE(a == init_model(c, 2));
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool is_bias = a.tensor(i).rank() == 1;
      if (is_bias) {
        for (double v : a.tensor(i).data()) CHECK(v == 0.0);
      } else {
        const auto& s = a.tensor(i).shape();
        const double bound = std::sqrt(6.0 / static_cast<double>(s[0] + s[1]));
        for (double v : a.tensor(i).data()) CHECK(std::abs(v) <= bound);
      }
    }
    CHECK(a.get("ca_w").shape() == Shape{c.seq_len * c.num_entity_classes, c.num_entity_classes});
    CHECK(a.get("ic_w").shape() == Shape{c.hidden_size, c.num_intents});
    CHECK(a.get("ec_w").shape() == Shape{c.hidden_size, c.num_entity_classes});
  }
}

TEST_CASE("shape chain from ids to presence logits") {
  for (EncoderKind kind : kKinds) {
    for (PoolingMode pool : {PoolingMode::kCls, PoolingMode::kMean}) {
      const EncoderConfig c = small_config(kind, pool);
      const ModelParams params = init_model(c, 3);
      Graph g;
      BoundParams p(g, params);
      const Input in = two_examples();
      const auto out = encode(p, in.ids, in.mask, in.batch);
      CHECK(out.cls.shape() == Shape{2, 6});
      CHECK(out.tokens.shape() == Shape{2, 5, 6});
      const Var ec = entity_logits(p, out.tokens);
      CHECK(ec.shape() == Shape{2, 5, 4});
      CHECK(intent_logits(p, out.cls).shape() == Shape{2, 3});
      CHECK(crossaligner_predict(p, ec).shape() == Shape{2, 4});
      CHECK(out.tokens.value().all_finite());
    }
  }
}

TEST_CASE("batch independence and determinism") {
  for (EncoderKind kind : kKinds) {
    for (PoolingMode pool : {PoolingMode::kCls, PoolingMode::kMean}) {
      const ModelParams params = init_model(small_config(kind, pool), 4);
      const Input in = two_examples();
      Graph g;
      BoundParams p(g, params);
      const auto both = encode(p, in.ids, in.mask, 2);
      // Example 1 alone.
      const std::vector<int> ids1(in.ids.begin() + 5, in.ids.end());
      const std::vector<int> mask1(in.mask.begin() + 5, in.mask.end());
      const auto alone = encode(p, ids1, mask1, 1);
      CHECK(row(both.cls.value(), 1, 6) == row(alone.cls.value(), 0, 6));
      CHECK(row(both.tokens.value(), 1, 30) == row(alone.tokens.value(), 0, 30));

      // Duplicated utterance gives identical rows.
      std::vector<int> dup_ids(in.ids.begin(), in.ids.begin() + 5), dup_mask(in.mask.begin(), in.mask.begin() + 5);
      dup_ids.insert(dup_ids.end(), dup_ids.begin(), dup_ids.end());
      dup_mask.insert(dup_mask.end(), dup_mask.begin(), dup_mask.end());
      const auto dup = encode(p, dup_ids, dup_mask, 2);
      CHECK(row(dup.cls.value(), 0, 6) == row(dup.cls.value(), 1, 6));
      CHECK(row(dup.tokens.value(), 0, 30) == row(dup.tokens.value(), 1, 30));

      Graph g2;
      BoundParams p2(g2, params);
      CHECK(bitwise_equal(encode(p2, in.ids, in.mask, 2).tokens.value(), both.tokens.value()));
    }
  }
}

TEST_CASE("cls pooling reads position 0") {
  for (EncoderKind kind : kKinds) {
    const ModelParams params = init_model(small_config(kind, PoolingMode::kCls), 5);
    Graph g;
    BoundParams p(g, params);
    const Input in = two_examples();
    const auto out = encode(p, in.ids, in.mask, 2);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto tok = row(out.tokens.value(), b * 5, 6);
      CHECK(row(out.cls.value(), b, 6) == tok);
    }
  }
}

TEST_CASE("mean pooling over a lone CLS is the CLS embedding") {
  for (EncoderKind kind : kKinds) {
    const ModelParams params = init_model(small_config(kind, PoolingMode::kMean), 6);
    Graph g;
    BoundParams p(g, params);
    const std::vector<int> ids{1, 0, 0, 0, 0}, mask{1, 0, 0, 0, 0};
    const auto out = encode(p, ids, mask, 1);
    const auto cls = row(out.cls.value(), 0, 6);
    const auto tok = row(out.tokens.value(), 0, 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(cls[i] == doctest::Approx(tok[i]).epsilon(1e-14));
  }
}

TEST_CASE("mean pooling averages the real positions") {
  const ModelParams params = init_model(small_config(EncoderKind::kTransformer, PoolingMode::kMean), 6);
  Graph g;
  BoundParams p(g, params);
  const Input in = two_examples();
  const auto out = encode(p, in.ids, in.mask, 2);
  const Tensor& t = out.tokens.value();
  for (std::size_t h = 0; h < 6; ++h) {
    const double expect = (t[0 * 6 + h] + t[1 * 6 + h] + t[2 * 6 + h] + t[3 * 6 + h]) / 4.0;
    CHECK(out.cls.value().at(0, h) == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("swapping two real tokens changes the transformer output") {
  const ModelParams params = init_model(small_config(), 7);
  Graph g;
  BoundParams p(g, params);
  const std::vector<int> a{1, 4, 7, 3, 0}, b{1, 7, 4, 3, 0}, mask{1, 1, 1, 1, 0};
  const auto oa = encode(p, a, mask, 1), ob = encode(p, b, mask, 1);
  CHECK(oa.cls.value() != ob.cls.value());
}

TEST_CASE("padding keys receive no attention") {
  // Changing the id at a padded position leaves real positions untouched.
  const ModelParams params = init_model(small_config(), 8);
  Graph g;
  BoundParams p(g, params);
  const std::vector<int> a{1, 4, 7, 0, 0}, b{1, 4, 7, 9, 5}, mask{1, 1, 1, 0, 0};
  const auto oa = encode(p, a, mask, 1), ob = encode(p, b, mask, 1);
  CHECK(row(oa.tokens.value(), 0, 18) == row(ob.tokens.value(), 0, 18));
}

TEST_CASE("head examples") {
  EncoderConfig c;
  c.vocab_size = 3;
  c.hidden_size = 1;
  c.num_layers = 1;
  c.seq_len = 2;
  c.num_intents = 1;
  c.num_entity_classes = 2;
  ModelParams params = init_model(c, 1);
  params.get("ic_w") = Tensor::matrix({{2.0}});
  params.get("ic_b") = Tensor::vector({1.0});
  Graph g;
  BoundParams p(g, params);
  CHECK(intent_logits(p, g.constant(Tensor::matrix({{3.0}}))).value() == Tensor::matrix({{7.0}}));

  const ModelParams zeros_bias = init_model(small_config(), 2);
  Graph g2;
  BoundParams p2(g2, zeros_bias);
  CHECK(intent_logits(p2, g2.constant(Tensor::zeros({2, 6}))).value() == Tensor::zeros({2, 3}));
  CHECK(entity_logits(p2, g2.constant(Tensor::zeros({2, 5, 6}))).value() == Tensor::zeros({2, 5, 4}));
  CHECK(crossaligner_predict(p2, g2.constant(Tensor::zeros({2, 5, 4}))).value() == Tensor::zeros({2, 4}));

  // Identical token vectors give identical logit rows.
  std::vector<double> tok(5 * 6, 0.25);
  const Var ec = entity_logits(p2, g2.constant(Tensor({1, 5, 6}, tok)));
  for (std::size_t s = 1; s < 5; ++s) CHECK(row(ec.value(), s, 4) == row(ec.value(), 0, 4));

  CHECK_THROWS_AS(intent_logits(p2, g2.constant(Tensor::zeros({2, 5}))), ShapeError);
  CHECK_THROWS_AS(entity_logits(p2, g2.constant(Tensor::zeros({2, 4, 6}))), ShapeError);
  CHECK_THROWS_AS(crossaligner_predict(p2, g2.constant(Tensor::zeros({2, 4, 5}))), ShapeError);
}

TEST_CASE("encode input errors") {
  const ModelParams params = init_model(small_config(), 2);
  Graph g;
  BoundParams p(g, params);
  const std::vector<int> ids{1, 4, 7, 3, 0}, mask{1, 1, 1, 1, 0};
  CHECK_THROWS_AS(encode(p, std::vector<int>{1, 12, 0, 0, 0}, mask, 1), IndexError);
  CHECK_THROWS_AS(encode(p, ids, std::vector<int>{1, 1, 1}, 1), ShapeError);
  CHECK_THROWS_AS(encode(p, ids, mask, 2), ShapeError);
  CHECK_THROWS_AS(encode(p, ids, std::vector<int>{0, 1, 1, 1, 0}, 1), std::invalid_argument);
}

TEST_CASE("presence loss gradient reaches the token embeddings") {
  for (EncoderKind kind : kKinds) {
    const ModelParams params = init_model(small_config(kind), 9);
    Graph g;
    BoundParams p(g, params);
    const Input in = two_examples();
    const auto out = encode(p, in.ids, in.mask, 2);
    const Var ca = crossaligner_predict(p, entity_logits(p, out.tokens));
    const Var loss = loss_binary_cross_entropy(ca, Tensor::matrix({{1, 1, 0, 0}, {1, 0, 1, 0}}));
    const Tensor grad = g.backward(loss).of(p["tok_emb"]);
    double norm = 0.0;
    for (double v : grad.data()) norm += v * v;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("head losses pass a gradient check against the embeddings") {
  const Input in = two_examples();
  const std::vector<int> y_ic{2, 0};
  const std::vector<int> y_ec{-100, 1, 0, 2, -100, -100, 3, -100, -100, -100};
  const Tensor y_ca = Tensor::matrix({{1, 1, 1, 0}, {1, 0, 0, 1}});
  for (EncoderKind kind : kKinds) {
    for (PoolingMode pool : {PoolingMode::kCls, PoolingMode::kMean}) {
      const ModelParams params = init_model(small_config(kind, pool), 10);
      using Head = std::function<Var(const BoundParams&, const EncoderOutput&)>;
      const std::vector<std::pair<const char*, Head>> heads{
          {"ic", [&](const BoundParams& p, const EncoderOutput& o) {
             return loss_cross_entropy(intent_logits(p, o.cls), y_ic);
           }},
          {"ec", [&](const BoundParams& p, const EncoderOutput& o) {
             return loss_cross_entropy(reshape(entity_logits(p, o.tokens), {10, 4}), y_ec, -100);
           }},
          {"ca", [&](const BoundParams& p, const EncoderOutput& o) {
             return loss_binary_cross_entropy(crossaligner_predict(p, entity_logits(p, o.tokens)), y_ca);
           }},
      };
      for (const auto& [name, head] : heads) {
        for (const char* target : {"tok_emb", "pos_emb"}) {
          const auto report = gradient_check(
              [&](const Var& x) {
                BoundParams p(*x.graph(), params);
                p.replace(target, x);
                return head(p, encode(p, in.ids, in.mask, 2));
              },
              params.get(target));
          INFO(to_string(kind), " ", to_string(pool), " ", name, " ", target);
          CHECK(report.pass);
          CHECK(report.max_rel_err < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  xalign::testing::TempDir dir;
  for (EncoderKind kind : kKinds) {
    Checkpoint ckpt{init_model(small_config(kind, PoolingMode::kMean), 11), {{"note", "x"}}};
    // Values that stress decimal formatting.
    ckpt.params.get("ic_b")[0] = 0.1 + 0.2;
    ckpt.params.get("ic_b")[1] = -1.0 / 3.0;
    ckpt.params.get("ic_b")[2] = 5e-324;
    const auto path = dir / (std::string(to_string(kind)) + ".json");
    save_checkpoint(path, ckpt);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.params.config() == ckpt.params.config());
    CHECK(back.metadata == ckpt.metadata);
    REQUIRE(back.params.size() == ckpt.params.size());
    for (std::size_t i = 0; i < back.params.size(); ++i) {
      CHECK(back.params.name(i) == ckpt.params.name(i));
      CHECK(bitwise_equal(back.params.tensor(i), ckpt.params.tensor(i)));
    }
  }
  auto j = checkpoint_to_json(Checkpoint{init_model(small_config(), 1), {}});
  j["version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(j), std::invalid_argument);
  j["version"] = kCheckpointVersion;
  j["tensors"][0]["shape"] = Shape{11, 6};
  j["tensors"][0]["data"] = std::vector<double>(66, 0.0);
  CHECK_THROWS_AS(checkpoint_from_json(j), std::invalid_argument);
}
