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

#ifndef XALIGN_TAGGING_HPP_
#define XALIGN_TAGGING_HPP_

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xalign {

class TagError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TagPrefix { kOutside, kBegin, kInside };

// One parsed tag: "O", "B-<TYPE>" or "I-<TYPE>". Case-sensitive.
struct Tag {
  TagPrefix prefix = TagPrefix::kOutside;
  std::string type;

  friend bool operator==(const Tag&, const Tag&) = default;
};

Tag parse_tag(std::string_view text);
std::string format_tag(const Tag& tag);

using TagSequence = std::vector<std::string>;

// Every B-T becomes I-T.
TagSequence bio_to_io(const TagSequence& tags);

// I-T becomes B-T when it starts the sequence, follows O, or follows a
// different type. Throws TagError on B-tags in the input.
TagSequence restore_b_tags(const TagSequence& tags);

// Stray I-T (after O or another type) is rewritten as B-T. `repaired`, when
// given, receives the number of rewritten positions.
TagSequence repair_bio(const TagSequence& tags, std::size_t* repaired = nullptr);

struct Span {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::string type;

  friend auto operator<=>(const Span&, const Span&) = default;
};

// Maximal entities of a BIO-valid sequence, ordered by start.
std::vector<Span> extract_spans(const TagSequence& tags);

struct BioViolation {
  enum class Kind { kSkippedBegin, kTypeBreak };
  std::size_t position = 0;
  Kind kind = Kind::kSkippedBegin;

  friend bool operator==(const BioViolation&, const BioViolation&) = default;
};

// Flags every I-T not preceded by B-T or I-T of the same type.
std::vector<BioViolation> validate_bio(const TagSequence& tags);

// Class index of positions excluded from the token-level loss (CLS, padding).
inline constexpr int kIgnoreIndex = -100;

// Multi-hot presence vector of length num_classes. Callers pass only real
// token positions. With include_outside = false, the O bit (class 0) stays 0.
std::vector<double> transform_labels(std::span<const int> class_indices, std::size_t num_classes,
                                     bool include_outside = true);

// Tag <-> class index map. O is always class 0. IO mode has one I-T class
// per type; BIO mode adds a B-T class before each I-T class.
class TagScheme {
 public:
  enum class Mode { kIO, kBIO };

  TagScheme() = default;
  TagScheme(std::vector<std::string> entity_types, Mode mode = Mode::kIO);

  // Entity types found in BIO/IO sequences, sorted.
  static TagScheme from_sequences(const std::vector<TagSequence>& corpus, Mode mode = Mode::kIO);

  Mode mode() const { return mode_; }
  const std::vector<std::string>& entity_types() const { return entity_types_; }
  std::size_t num_classes() const { return tags_.size(); }

  int index_of(std::string_view tag) const;
  const std::string& tag_of(int index) const;
  std::vector<int> encode(const TagSequence& tags) const;
  TagSequence decode(std::span<const int> indices) const;

  friend bool operator==(const TagScheme& a, const TagScheme& b) {
    return a.mode_ == b.mode_ && a.entity_types_ == b.entity_types_;
  }

 private:
  Mode mode_ = Mode::kIO;
  std::vector<std::string> entity_types_;
  std::vector<std::string> tags_;
  std::map<std::string, int, std::less<>> index_;
};

}  // namespace xalign

#endif  // XALIGN_TAGGING_HPP_
