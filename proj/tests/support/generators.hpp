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

#ifndef XALIGN_TESTS_SUPPORT_GENERATORS_HPP_
#define XALIGN_TESTS_SUPPORT_GENERATORS_HPP_

#include <random>
#include <string>
#include <vector>

#include "xalign/tagging.hpp"

namespace xalign::testing {

inline const std::vector<std::string>& entity_types() {
  static const std::vector<std::string> types{"LOC", "PER", "DATE", "ORG"};
  return types;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// BIO-valid sequence in which no entity starts right after another entity of
// the same type (the one case the IO scheme cannot represent).
inline TagSequence random_bio_without_adjacent(std::mt19937_64& rng, std::size_t max_len = 16) {
  const auto& types = entity_types();
  const std::size_t len = pick(rng, max_len + 1);
  TagSequence tags;
  std::string prev_type;  // empty after O
  while (tags.size() < len) {
    if (pick(rng, 3) == 0) {
      tags.push_back("O");
      prev_type.clear();
      continue;
    }
    std::string type;
    do {
      type = types[pick(rng, types.size())];
    } while (type == prev_type);
    const std::size_t span = 1 + pick(rng, 3);
    for (std::size_t i = 0; i < span && tags.size() < len; ++i) {
      tags.push_back((i == 0 ? "B-" : "I-") + type);
    }
    prev_type = type;
  }
  return tags;
}

// Any BIO-valid sequence, adjacent same-type entities included.
inline TagSequence random_bio(std::mt19937_64& rng, std::size_t max_len = 16) {
  const auto& types = entity_types();
  const std::size_t len = pick(rng, max_len + 1);
  TagSequence tags;
  std::string open;
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t r = pick(rng, 4);
    if (r == 0) {
      tags.push_back("O");
      open.clear();
    } else if (r == 1 && !open.empty()) {
      tags.push_back("I-" + open);
    } else {
      open = types[pick(rng, types.size())];
      tags.push_back("B-" + open);
    }
  }
  return tags;
}

// Arbitrary IO sequence.
inline TagSequence random_io(std::mt19937_64& rng, std::size_t max_len = 16) {
  const auto& types = entity_types();
  const std::size_t len = pick(rng, max_len + 1);
  TagSequence tags;
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t r = pick(rng, types.size() + 1);
    tags.push_back(r == types.size() ? std::string("O") : "I-" + types[r]);
  }
  return tags;
}

}  // namespace xalign::testing

#endif  // XALIGN_TESTS_SUPPORT_GENERATORS_HPP_
