// Copyright 2026 The zsgsr Authors.
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

// Domain types shared by the whole engine plus the small amount of pure
// vector and box geometry every stage relies on.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zsgsr/error.hpp"

namespace zsgsr {

// ---------------------------------------------------------------------------
// Tokens

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

struct TokenSpan {
  std::size_t pos;
  std::size_t len;
};

// Maximal runs of [A-Za-z0-9_] in `text`, in order of appearance.
inline std::vector<TokenSpan> word_spans(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && is_word_char(text[i])) ++i;
    out.push_back({start, i - start});
  }
  return out;
}

inline std::string to_upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// True when `token` appears in `text` as a whole word.
inline bool contains_token(std::string_view text, std::string_view token,
                           bool case_insensitive = false) {
  if (token.empty()) return false;
  const std::string needle = case_insensitive ? to_upper(token) : std::string(token);
  for (const TokenSpan& w : word_spans(text)) {
    if (w.len != needle.size()) continue;
    std::string_view word = text.substr(w.pos, w.len);
    if (case_insensitive ? to_upper(word) == needle : word == needle) return true;
  }
  return false;
}

// True when the words of `phrase` appear consecutively in `text`, ignoring
// the punctuation and spacing between them.
inline bool contains_phrase(std::string_view text, std::string_view phrase, bool case_insensitive = false) {
  auto words = [&](std::string_view s) {
    std::vector<std::string> out;
    for (const TokenSpan& w : word_spans(s)) {
      const std::string_view word = s.substr(w.pos, w.len);
      out.push_back(case_insensitive ? to_upper(word) : std::string(word));
    }
    return out;
  };
  const std::vector<std::string> needle = words(phrase);
  const std::vector<std::string> hay = words(text);
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Vocabulary

class SemanticRole {
 public:
  explicit SemanticRole(std::string name) : name_(std::move(name)) {
    if (name_.empty()) fail(ErrorCode::kInvalidArgument, "semantic role name is empty");
    for (char c : name_) {
      const auto u = static_cast<unsigned char>(c);
      if (!(std::isupper(u) || std::isdigit(u))) {
        fail(ErrorCode::kInvalidArgument,
             "semantic role '" + name_ + "' must be uppercase alphanumeric");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }

  friend auto operator<=>(const SemanticRole&, const SemanticRole&) = default;

 private:
  std::string name_;
};

struct NounClass {
  std::string id;
  std::string gloss;

  void validate() const {
    if (id.empty()) fail(ErrorCode::kInvalidArgument, "noun id is empty");
    if (trim(gloss).empty()) fail(ErrorCode::kInvalidArgument, "noun '" + id + "' has an empty gloss");
  }

  friend bool operator==(const NounClass&, const NounClass&) = default;
};

class VerbClass {
 public:
  VerbClass(std::string id, std::string display_name, std::string template_text,
            std::vector<SemanticRole> roles)
      : id_(std::move(id)),
        display_name_(std::move(display_name)),
        template_(std::move(template_text)),
        roles_(std::move(roles)) {
    if (id_.empty()) fail(ErrorCode::kInvalidArgument, "verb id is empty");
    if (display_name_.empty()) display_name_ = id_;
    if (roles_.empty()) fail(ErrorCode::kInvalidArgument, "verb '" + id_ + "' has no roles");
    std::set<SemanticRole> seen;
    for (const SemanticRole& r : roles_) {
      if (!seen.insert(r).second) {
        fail(ErrorCode::kInvalidArgument, "verb '" + id_ + "' repeats role " + r.name());
      }
      if (!contains_token(template_, r.name())) {
        fail(ErrorCode::kInvalidArgument,
             "template of verb '" + id_ + "' does not contain role " + r.name());
      }
    }
  }

  const std::string& id() const noexcept { return id_; }
  const std::string& display_name() const noexcept { return display_name_; }
  const std::string& template_text() const noexcept { return template_; }
  const std::vector<SemanticRole>& roles() const noexcept { return roles_; }

  bool has_role(const SemanticRole& role) const {
    return std::find(roles_.begin(), roles_.end(), role) != roles_.end();
  }

  // Roles sorted by their first whole-token occurrence in the template.
  std::vector<SemanticRole> roles_in_template_order() const {
    std::vector<std::pair<std::size_t, SemanticRole>> keyed;
    const auto words = word_spans(template_);
    for (const SemanticRole& r : roles_) {
      std::size_t first = template_.size();
      for (const TokenSpan& w : words) {
        if (std::string_view(template_).substr(w.pos, w.len) == r.name()) {
          first = w.pos;
          break;
        }
      }
      keyed.emplace_back(first, r);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<SemanticRole> out;
    for (auto& [pos, r] : keyed) out.push_back(r);
    return out;
  }

  friend bool operator==(const VerbClass&, const VerbClass&) = default;

 private:
  std::string id_;
  std::string display_name_;
  std::string template_;
  std::vector<SemanticRole> roles_;
};

// ---------------------------------------------------------------------------
// Geometry

class Embedding {
 public:
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) fail(ErrorCode::kInvalidArgument, "embedding has zero dimension");
    for (double v : values_) {
      if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "embedding has a non-finite entry");
    }
  }

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

  double norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  Embedding normalized() const {
    const double n = norm();
    if (n == 0.0) fail(ErrorCode::kDegenerateInput, "cannot normalize a zero vector");
    std::vector<double> out(values_);
    for (double& v : out) v /= n;
    return Embedding(std::move(out));
  }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

class BoundingBox {
 public:
  BoundingBox(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
    for (double v : {x1, y1, x2, y2}) {
      if (!std::isfinite(v) || v < 0.0) {
        fail(ErrorCode::kInvalidArgument, "box coordinates must be finite and non-negative");
      }
    }
    if (!(x1 < x2 && y1 < y2)) {
      fail(ErrorCode::kInvalidArgument, "box must satisfy x1 < x2 and y1 < y2");
    }
  }

  double x1() const noexcept { return x1_; }
  double y1() const noexcept { return y1_; }
  double x2() const noexcept { return x2_; }
  double y2() const noexcept { return y2_; }
  double width() const noexcept { return x2_ - x1_; }
  double height() const noexcept { return y2_ - y1_; }
  double area() const noexcept { return width() * height(); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x1_, y1_, x2_, y2_;
};

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    fail(ErrorCode::kInvalidArgument, "cosine similarity of embeddings with dims " +
                                          std::to_string(a.dim()) + " and " +
                                          std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na += av[i] * av[i];
    nb += bv[i] * bv[i];
  }
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::kDegenerateInput, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

// ---------------------------------------------------------------------------
// Templates

using RoleAssignment = std::map<SemanticRole, std::string>;

// Replaces every whole-token occurrence of an assigned role in `text` with its
// gloss. Unassigned role tokens and all other text are kept byte for byte.
inline std::string fill_role_tokens(std::string_view text, const RoleAssignment& assignments) {
  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  for (const TokenSpan& w : word_spans(text)) {
    std::string_view word = text.substr(w.pos, w.len);
    auto it = std::find_if(assignments.begin(), assignments.end(),
                           [&](const auto& kv) { return kv.first.name() == word; });
    if (it == assignments.end()) continue;
    out.append(text.substr(cursor, w.pos - cursor));
    out.append(it->second);
    cursor = w.pos + w.len;
  }
  out.append(text.substr(cursor));
  return out;
}

inline std::string fill_template(const VerbClass& verb, const RoleAssignment& assignments) {
  for (const auto& [role, gloss] : assignments) {
    if (!verb.has_role(role)) {
      fail(ErrorCode::kInvalidArgument,
           "role " + role.name() + " is not a role of verb '" + verb.id() + "'");
    }
    if (trim(gloss).empty()) {
      fail(ErrorCode::kInvalidArgument, "empty gloss for role " + role.name());
    }
  }
  return fill_role_tokens(verb.template_text(), assignments);
}

// ---------------------------------------------------------------------------
// Frames

struct RoleFill {
  std::string noun;
  std::optional<BoundingBox> box;
  double score = 0.0;

  friend bool operator==(const RoleFill&, const RoleFill&) = default;
};

struct PredictedFrame {
  std::string verb;
  std::map<SemanticRole, RoleFill> role_fills;

  friend bool operator==(const PredictedFrame&, const PredictedFrame&) = default;
};

inline constexpr std::size_t kAnnotatorsPerImage = 3;

struct FrameAnnotation {
  std::string image_id;
  std::string verb;
  // One map per annotator; an empty noun id means "no entity".
  std::vector<std::map<SemanticRole, std::string>> annotator_frames;
  // Roles without a visible box are absent from the map.
  std::map<SemanticRole, BoundingBox> gt_boxes;

  void validate(const VerbClass& v) const {
    if (v.id() != verb) fail(ErrorCode::kDataError, image_id + ": verb mismatch");
    if (annotator_frames.size() != kAnnotatorsPerImage) {
      fail(ErrorCode::kDataError, image_id + ": expected 3 annotator frames, got " +
                                      std::to_string(annotator_frames.size()));
    }
    for (const auto& frame : annotator_frames) {
      for (const auto& [role, noun] : frame) {
        if (!v.has_role(role)) {
          fail(ErrorCode::kDataError, image_id + ": role " + role.name() +
                                          " is not a role of verb '" + verb + "'");
        }
      }
    }
    for (const auto& [role, box] : gt_boxes) {
      if (!v.has_role(role)) {
        fail(ErrorCode::kDataError, image_id + ": box for unknown role " + role.name());
      }
    }
  }
};

}  // namespace zsgsr
