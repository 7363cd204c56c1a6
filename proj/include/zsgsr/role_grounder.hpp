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

// Candidate box generation: one grounding call per rephrased template, the
// most confident box per role per rephrasing, unioned across rephrasings.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsgsr/backends.hpp"
#include "zsgsr/core.hpp"
#include "zsgsr/explainers.hpp"
#include "zsgsr/log.hpp"

namespace zsgsr {

struct CandidateBox {
  SemanticRole role;
  BoundingBox box;
  double confidence;
  std::size_t source_index;  // which rephrasing produced the box

  friend bool operator==(const CandidateBox&, const CandidateBox&) = default;
};

// Case-insensitive whole-word search for role tokens in a grounder label. The
// longest matching role wins; equal lengths keep the earlier role.
inline std::optional<SemanticRole> match_label_to_role(std::string_view phrase,
                                                       std::span<const SemanticRole> roles) {
  std::optional<SemanticRole> best;
  for (const SemanticRole& r : roles) {
    if (!contains_token(phrase, r.name(), /*case_insensitive=*/true)) continue;
    if (!best || r.name().size() > best->name().size()) best = r;
  }
  return best;
}

struct GroundingOptions {
  double min_confidence = 0.0;
};

// Output is ordered by (source_index, role order of the verb). Roles never
// detected are absent.
inline std::vector<CandidateBox> ground_candidates(const Backend& backend, const ImageRef& image,
                                                   const VerbClass& verb,
                                                   const DescriptionSet& rephrasings,
                                                   const GroundingOptions& options = {}) {
  if (rephrasings.descriptions.empty()) {
    fail(ErrorCode::kInvalidArgument, "ground_candidates needs at least one rephrasing");
  }
  std::vector<CandidateBox> out;
  std::size_t failures = 0;
  std::string last_error;
  for (std::size_t i = 0; i < rephrasings.descriptions.size(); ++i) {
    std::vector<Detection> detections;
    try {
      detections = backend.ground(image, rephrasings.descriptions[i]);
    } catch (const Error& e) {
      ++failures;
      last_error = e.what();
      log::warning(image.uri + ": grounding rephrasing " + std::to_string(i) + " failed: " + e.what());
      continue;
    }
    std::map<SemanticRole, const Detection*> best;
    for (const Detection& d : detections) {
      if (d.score < options.min_confidence) continue;
      auto role = match_label_to_role(d.phrase, verb.roles());
      if (!role) continue;
      auto [it, inserted] = best.try_emplace(*role, &d);
      if (inserted) continue;
      const Detection* cur = it->second;
      // Ties on confidence prefer the tighter box, then the earlier detection.
      if (d.score > cur->score || (d.score == cur->score && d.box.area() < cur->box.area())) {
        it->second = &d;
      }
    }
    for (const SemanticRole& r : verb.roles()) {
      if (auto it = best.find(r); it != best.end()) {
        out.push_back(CandidateBox{r, it->second->box, it->second->score, i});
      }
    }
  }
  if (failures == rephrasings.descriptions.size()) {
    fail(ErrorCode::kGroundingFailed, image.uri + ": every grounding call failed: " + last_error);
  }
  return out;
}

}  // namespace zsgsr
