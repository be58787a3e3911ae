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

#include "xalign/tagging.hpp"

#include <algorithm>
#include <set>

namespace xalign {

Tag parse_tag(std::string_view text) {
  if (text == "O") return Tag{};
  if (text.size() > 2 && text[1] == '-' && (text[0] == 'B' || text[0] == 'I')) {
    return Tag{text[0] == 'B' ? TagPrefix::kBegin : TagPrefix::kInside, std::string(text.substr(2))};
  }
  throw TagError("unknown tag '" + std::string(text) + "'");
}

std::string format_tag(const Tag& tag) {
  switch (tag.prefix) {
    case TagPrefix::kOutside: return "O";
    case TagPrefix::kBegin: return "B-" + tag.type;
    case TagPrefix::kInside: return "I-" + tag.type;
  }
  return "O";
}

TagSequence bio_to_io(const TagSequence& tags) {
  TagSequence out;
  out.reserve(tags.size());
  for (const auto& t : tags) {
    Tag tag = parse_tag(t);
    if (tag.prefix == TagPrefix::kBegin) tag.prefix = TagPrefix::kInside;
    out.push_back(format_tag(tag));
  }
  return out;
}

TagSequence restore_b_tags(const TagSequence& tags) {
  TagSequence out;
  out.reserve(tags.size());
  Tag prev;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    Tag tag = parse_tag(tags[i]);
    if (tag.prefix == TagPrefix::kBegin) {
      throw TagError("restore_b_tags: B-tag at position " + std::to_string(i) + " in IO input");
    }
    const Tag in = tag;
    if (tag.prefix == TagPrefix::kInside &&
        (prev.prefix == TagPrefix::kOutside || prev.type != tag.type)) {
      tag.prefix = TagPrefix::kBegin;
    }
    out.push_back(format_tag(tag));
    prev = in;
  }
  return out;
}

TagSequence repair_bio(const TagSequence& tags, std::size_t* repaired) {
  TagSequence out = tags;
  std::size_t count = 0;
  for (const auto& v : validate_bio(tags)) {
    Tag tag = parse_tag(tags[v.position]);
    tag.prefix = TagPrefix::kBegin;
    out[v.position] = format_tag(tag);
    ++count;
  }
  if (repaired) *repaired = count;
  return out;
}

std::vector<BioViolation> validate_bio(const TagSequence& tags) {
  std::vector<BioViolation> out;
  Tag prev;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag tag = parse_tag(tags[i]);
    if (tag.prefix == TagPrefix::kInside) {
      if (prev.prefix == TagPrefix::kOutside) {
        out.push_back({i, BioViolation::Kind::kSkippedBegin});
      } else if (prev.type != tag.type) {
        out.push_back({i, BioViolation::Kind::kTypeBreak});
      }
    }
    prev = tag;
  }
  return out;
}

std::vector<Span> extract_spans(const TagSequence& tags) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag tag = parse_tag(tags[i]);
    switch (tag.prefix) {
      case TagPrefix::kOutside:
        open = false;
        break;
      case TagPrefix::kBegin:
        spans.push_back({i, i, tag.type});
        open = true;
        break;
      case TagPrefix::kInside:
        if (!open || spans.back().type != tag.type) {
          throw TagError("extract_spans: invalid BIO transition to " + tags[i] + " at position " +
                         std::to_string(i));
        }
        spans.back().end = i;
        break;
    }
  }
  return spans;
}

std::vector<double> transform_labels(std::span<const int> class_indices, std::size_t num_classes,
                                     bool include_outside) {
  std::vector<double> presence(num_classes, 0.0);
  for (int c : class_indices) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw TagError("transform_labels: class " + std::to_string(c) + " outside [0, " +
                     std::to_string(num_classes) + ")");
    }
    presence[static_cast<std::size_t>(c)] = 1.0;
  }
  if (!include_outside && num_classes > 0) presence[0] = 0.0;
  return presence;
}

// ---------------------------------------------------------------------------

TagScheme::TagScheme(std::vector<std::string> entity_types, Mode mode)
    : mode_(mode), entity_types_(std::move(entity_types)) {
  tags_.push_back("O");
  for (const auto& type : entity_types_) {
    if (type.empty()) throw TagError("empty entity type");
    if (mode_ == Mode::kBIO) tags_.push_back("B-" + type);
    tags_.push_back("I-" + type);
  }
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (!index_.emplace(tags_[i], static_cast<int>(i)).second) {
      throw TagError("duplicate tag " + tags_[i]);
    }
  }
}

TagScheme TagScheme::from_sequences(const std::vector<TagSequence>& corpus, Mode mode) {
  std::set<std::string> types;
  for (const auto& seq : corpus) {
    for (const auto& t : seq) {
      Tag tag = parse_tag(t);
      if (tag.prefix != TagPrefix::kOutside) types.insert(tag.type);
    }
  }
  return TagScheme(std::vector<std::string>(types.begin(), types.end()), mode);
}

int TagScheme::index_of(std::string_view tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) throw TagError("tag '" + std::string(tag) + "' not in scheme");
  return it->second;
}

const std::string& TagScheme::tag_of(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tags_.size()) {
    throw TagError("class index " + std::to_string(index) + " not in scheme");
  }
  return tags_[static_cast<std::size_t>(index)];
}

std::vector<int> TagScheme::encode(const TagSequence& tags) const {
  std::vector<int> out;
  out.reserve(tags.size());
  for (const auto& t : tags) out.push_back(index_of(t));
  return out;
}

TagSequence TagScheme::decode(std::span<const int> indices) const {
  TagSequence out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(tag_of(i));
  return out;
}

}  // namespace xalign
