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

// Noun recognition: fused class/description scoring of the nouns allowed for
// each candidate box, then per-role refinement that compares filled templates
// against the whole image.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "zsgsr/backends.hpp"
#include "zsgsr/core.hpp"
#include "zsgsr/explainers.hpp"
#include "zsgsr/log.hpp"
#include "zsgsr/role_grounder.hpp"
#include "zsgsr/verb_recognizer.hpp"

namespace zsgsr {

using NounVocabulary = std::map<std::string, NounClass>;

struct RankedNoun {
  std::string noun;
  double score;

  friend bool operator==(const RankedNoun&, const RankedNoun&) = default;
};

struct NounPrePrediction {
  SemanticRole role;
  // Absent for the whole-image fallback of roles the grounder never found.
  std::optional<CandidateBox> candidate;
  std::vector<RankedNoun> ranked_nouns;  // score descending, ties by ascending id

  const std::string& top_noun() const { return ranked_nouns.front().noun; }
  double top_score() const { return ranked_nouns.front().score; }
  double confidence() const { return candidate ? candidate->confidence : 0.0; }
};

struct RefinedRole {
  std::string noun;
  std::optional<BoundingBox> box;
  double score = 0.0;

  friend bool operator==(const RefinedRole&, const RefinedRole&) = default;
};

struct NounScoringOptions {
  double lambda = 0.5;
  bool use_descriptions = true;
  std::string class_prompt = kDefaultClassPrompt;
};

class NounRecognizer {
 public:
  // `explainer` may be null when descriptions are disabled.
  NounRecognizer(const Backend& backend, TextEmbeddingCache& embedder, Explainer* explainer,
                 const NounVocabulary& nouns, NounScoringOptions options)
      : backend_(backend),
        embedder_(embedder),
        explainer_(explainer),
        nouns_(nouns),
        options_(std::move(options)) {
    if (!(options_.lambda >= 0.0 && options_.lambda <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "lambda must lie in [0,1]");
    }
  }

  const NounClass& noun(const std::string& id) const {
    auto it = nouns_.find(id);
    if (it == nouns_.end()) fail(ErrorCode::kDataError, "unknown noun '" + id + "'");
    return it->second;
  }

  NounPrePrediction pre_predict(const ImageRef& image, const CandidateBox& candidate,
                                const VerbClass& verb, const std::set<std::string>& allowed) const {
    return pre_predict_region(backend_.embed_region(image, candidate.box), candidate, candidate.role,
                              verb, allowed);
  }

  // Scores every allowed noun against an already embedded region. Nouns whose
  // descriptions cannot be generated fall back to their class term.
  NounPrePrediction pre_predict_region(const Embedding& region, std::optional<CandidateBox> candidate,
                                       const SemanticRole& role, const VerbClass& verb,
                                       const std::set<std::string>& allowed) const {
    if (allowed.empty()) fail(ErrorCode::kInvalidArgument, "no nouns allowed for " + role.name());

    struct Span {
      std::size_t begin;
      std::size_t count;
    };
    std::vector<std::string> texts;
    std::vector<Span> desc_spans;
    for (const std::string& id : allowed) {
      const NounClass& n = noun(id);
      texts.push_back(class_prompt(options_.class_prompt, n.gloss));
      Span span{texts.size(), 0};
      if (options_.use_descriptions && options_.lambda > 0.0 && explainer_ != nullptr) {
        try {
          const DescriptionSet set = explainer_->generate_noun_descriptions(verb, role, n);
          texts.insert(texts.end(), set.descriptions.begin(), set.descriptions.end());
          span.count = set.descriptions.size();
        } catch (const Error& e) {
          log::warning("noun descriptions for (" + verb.id() + ", " + role.name() + ", " + id +
                       ") unavailable, using the class prompt: " + e.what());
        }
      }
      desc_spans.push_back(span);
    }
    const std::vector<Embedding> embs = embedder_.embed(texts);

    NounPrePrediction pred{role, std::move(candidate), {}};
    std::size_t i = 0;
    for (const std::string& id : allowed) {
      const Span& span = desc_spans[i++];
      const double class_term = cosine_similarity(region, embs[span.begin - 1]);
      double desc_term = class_term;
      if (span.count > 0) {
        // Uniform weights over the scene-specific descriptions.
        desc_term = 0.0;
        for (std::size_t d = 0; d < span.count; ++d) {
          desc_term += cosine_similarity(region, embs[span.begin + d]);
        }
        desc_term /= static_cast<double>(span.count);
      }
      pred.ranked_nouns.push_back({id, (1.0 - options_.lambda) * class_term + options_.lambda * desc_term});
    }
    std::stable_sort(pred.ranked_nouns.begin(), pred.ranked_nouns.end(),
                     [](const RankedNoun& a, const RankedNoun& b) {
                       if (a.score != b.score) return a.score > b.score;
                       return a.noun < b.noun;
                     });
    return pred;
  }

  // Sequential refinement in template order. For the role under refinement
  // each candidate contributes one filled template: its own top noun, the
  // current choice for every other role. The candidate whose sentence is
  // closest to the whole image wins. `fallbacks` holds whole-image
  // predictions for roles that have no candidates.
  std::map<SemanticRole, RefinedRole> refine(const Embedding& image, const VerbClass& verb,
                                             const std::vector<NounPrePrediction>& preds,
                                             const std::map<SemanticRole, NounPrePrediction>& fallbacks) const {
    auto groups = group_by_role(verb, preds);
    std::map<SemanticRole, RefinedRole> current = initial_choice(groups, fallbacks);

    for (const SemanticRole& role : verb.roles_in_template_order()) {
      auto git = groups.find(role);
      if (git == groups.end()) continue;
      const auto& cands = git->second;
      if (cands.size() == 1) {
        current[role] = as_refined(*cands.front());
        continue;
      }
      std::vector<std::string> sentences;
      for (const NounPrePrediction* c : cands) {
        RoleAssignment fill;
        for (const auto& [r, chosen] : current) fill.emplace(r, noun(chosen.noun).gloss);
        fill[role] = noun(c->top_noun()).gloss;
        sentences.push_back(fill_template(verb, fill));
      }
      const std::vector<Embedding> embs = embedder_.embed(sentences);
      std::size_t best = 0;
      double best_sim = cosine_similarity(image, embs[0]);
      for (std::size_t i = 1; i < cands.size(); ++i) {
        const double sim = cosine_similarity(image, embs[i]);
        const NounPrePrediction& a = *cands[i];
        const NounPrePrediction& b = *cands[best];
        if (sim > best_sim ||
            (sim == best_sim && (a.confidence() > b.confidence() ||
                                 (a.confidence() == b.confidence() && a.top_noun() < b.top_noun())))) {
          best = i;
          best_sim = sim;
        }
      }
      current[role] = as_refined(*cands[best]);
    }
    return current;
  }

  // Refinement disabled: the most confident box of each role, as the class
  // prompt baseline does.
  std::map<SemanticRole, RefinedRole> select_by_confidence(
      const VerbClass& verb, const std::vector<NounPrePrediction>& preds,
      const std::map<SemanticRole, NounPrePrediction>& fallbacks) const {
    std::map<SemanticRole, RefinedRole> out;
    for (const auto& [role, cands] : group_by_role(verb, preds)) {
      const NounPrePrediction* best = cands.front();
      for (const NounPrePrediction* c : cands) {
        const double ca = c->confidence();
        const double cb = best->confidence();
        if (ca > cb || (ca == cb && c->candidate->box.area() < best->candidate->box.area())) best = c;
      }
      out[role] = as_refined(*best);
    }
    for (const auto& [role, fb] : fallbacks) out.try_emplace(role, as_refined(fb));
    return out;
  }

 private:
  using Groups = std::map<SemanticRole, std::vector<const NounPrePrediction*>>;

  static Groups group_by_role(const VerbClass& verb, const std::vector<NounPrePrediction>& preds) {
    Groups groups;
    for (const NounPrePrediction& p : preds) {
      if (!p.candidate) fail(ErrorCode::kInternal, "refinement input without a candidate box");
      if (!verb.has_role(p.role)) {
        fail(ErrorCode::kInternal, p.role.name() + " is not a role of '" + verb.id() + "'");
      }
      if (p.ranked_nouns.empty()) fail(ErrorCode::kInternal, "empty noun ranking");
      groups[p.role].push_back(&p);
    }
    return groups;
  }

  static RefinedRole as_refined(const NounPrePrediction& p) {
    return RefinedRole{p.top_noun(),
                       p.candidate ? std::optional<BoundingBox>(p.candidate->box) : std::nullopt,
                       p.top_score()};
  }

  static std::map<SemanticRole, RefinedRole> initial_choice(
      const Groups& groups, const std::map<SemanticRole, NounPrePrediction>& fallbacks) {
    std::map<SemanticRole, RefinedRole> out;
    for (const auto& [role, cands] : groups) {
      const NounPrePrediction* best = cands.front();
      for (const NounPrePrediction* c : cands) {
        if (c->top_score() != best->top_score()) {
          if (c->top_score() > best->top_score()) best = c;
        } else if (c->confidence() != best->confidence()) {
          if (c->confidence() > best->confidence()) best = c;
        } else if (c->top_noun() < best->top_noun()) {
          best = c;
        }
      }
      out[role] = as_refined(*best);
    }
    for (const auto& [role, fb] : fallbacks) out.try_emplace(role, as_refined(fb));
    return out;
  }

  const Backend& backend_;
  TextEmbeddingCache& embedder_;
  Explainer* explainer_;
  const NounVocabulary& nouns_;
  NounScoringOptions options_;
};

inline PredictedFrame assemble_frame(const VerbClass& verb,
                                     const std::map<SemanticRole, RefinedRole>& refined,
                                     const NounVocabulary* vocab = nullptr) {
  PredictedFrame frame{verb.id(), {}};
  for (const SemanticRole& role : verb.roles()) {
    auto it = refined.find(role);
    if (it == refined.end()) {
      fail(ErrorCode::kInternal, "no prediction for role " + role.name() + " of '" + verb.id() + "'");
    }
    if (vocab && !vocab->contains(it->second.noun)) {
      fail(ErrorCode::kInternal, "predicted noun '" + it->second.noun + "' is not in the vocabulary");
    }
    frame.role_fills.emplace(role, RoleFill{it->second.noun, it->second.box, it->second.score});
  }
  if (refined.size() != verb.roles().size()) {
    fail(ErrorCode::kInternal, "prediction covers roles outside '" + verb.id() + "'");
  }
  return frame;
}

}  // namespace zsgsr
