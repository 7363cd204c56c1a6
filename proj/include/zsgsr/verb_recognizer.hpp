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

// Verb recognition: offline description weighting from scene texts, then
// fused class/description scoring of every verb for an image.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zsgsr/backends.hpp"
#include "zsgsr/core.hpp"
#include "zsgsr/json_io.hpp"

namespace zsgsr {

// Correlations are clamped to this floor before normalization so negative
// cosines cannot produce a negative probability.
inline constexpr double kRhoFloor = 1e-6;
// Entropy floor keeping exp(1/Dis) finite.
inline constexpr double kDisFloor = 1e-3;

inline constexpr const char* kDefaultClassPrompt = "a photo of {CLASS}";

inline std::string class_prompt(std::string_view pattern, std::string_view class_name) {
  std::string out(pattern);
  const std::string placeholder = "{CLASS}";
  if (auto pos = out.find(placeholder); pos != std::string::npos) {
    out.replace(pos, placeholder.size(), class_name);
  } else {
    out += " ";
    out += class_name;
  }
  return out;
}

struct Discriminability {
  std::vector<std::string> verbs;  // ascending id, the order of the vectors below
  std::vector<double> rho;         // mean cosine against each verb's scene texts
  std::vector<double> rho_bar;     // clamped and normalized over verbs
  double dis = 0.0;                // entropy of rho_bar in nats, >= kDisFloor
};

// Fills rho_bar and dis from rho. Similarities below kRhoFloor are clamped
// before normalization.
inline void normalize_rho(Discriminability& d) {
  if (d.rho.empty()) fail(ErrorCode::kInvalidArgument, "no verbs to compare against");
  double total = 0.0;
  for (double r : d.rho) total += std::max(r, kRhoFloor);
  double entropy = 0.0;
  d.rho_bar.clear();
  for (double r : d.rho) {
    const double p = std::max(r, kRhoFloor) / total;
    d.rho_bar.push_back(p);
    entropy -= p * std::log(p);
  }
  d.dis = std::max(entropy, kDisFloor);
}

inline Discriminability compute_discriminability(
    const Embedding& description, const std::map<std::string, std::vector<Embedding>>& scenes) {
  if (scenes.empty()) fail(ErrorCode::kInvalidArgument, "no verbs to compare against");
  Discriminability out;
  for (const auto& [verb, embs] : scenes) {
    if (embs.empty()) fail(ErrorCode::kInvalidArgument, "verb '" + verb + "' has no scene texts");
    double sum = 0.0;
    for (const Embedding& s : embs) sum += cosine_similarity(s, description);
    out.verbs.push_back(verb);
    out.rho.push_back(sum / static_cast<double>(embs.size()));
  }
  normalize_rho(out);
  return out;
}

inline constexpr double kWeightFloor = std::numeric_limits<double>::min();

// Softmax over 1/Dis: low-entropy (discriminative) descriptions weigh more.
inline std::vector<double> compute_weights(std::span<const double> dis) {
  if (dis.empty()) fail(ErrorCode::kInvalidArgument, "compute_weights needs at least one value");
  std::vector<double> logits;
  logits.reserve(dis.size());
  for (double d : dis) {
    if (!(d >= kDisFloor) || !std::isfinite(d)) {
      fail(ErrorCode::kInvalidArgument, "discriminability below the floor");
    }
    logits.push_back(1.0 / d);
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    sum += l;
  }
  // A 1/Dis spread past ~708 underflows exp; keep such weights positive.
  for (double& l : logits) l = std::max(l / sum, kWeightFloor);
  return logits;
}

struct DescriptionWeight {
  std::string description;
  Discriminability discriminability;
  double weight = 0.0;
};

struct WeightTable {
  // Keyed by verb id.
  std::map<std::string, std::vector<DescriptionWeight>> verbs;

  const std::vector<DescriptionWeight>& at(const std::string& verb) const {
    auto it = verbs.find(verb);
    if (it == verbs.end()) fail(ErrorCode::kDataError, "weight table has no verb '" + verb + "'");
    return it->second;
  }
};

struct WeightInputs {
  // verb id -> (description text, embedding)
  std::map<std::string, std::vector<std::pair<std::string, Embedding>>> descriptions;
  // verb id -> scene text embeddings
  std::map<std::string, std::vector<Embedding>> scenes;
};

// With `weighting` off every description of a verb gets 1/|D_v| and scene
// texts are not consulted (the discriminability columns stay zero).
inline WeightTable build_weight_table(const WeightInputs& in, bool weighting = true) {
  WeightTable table;
  for (const auto& [verb, descs] : in.descriptions) {
    if (descs.empty()) fail(ErrorCode::kInvalidArgument, "verb '" + verb + "' has no descriptions");
    std::vector<DescriptionWeight> rows;
    std::vector<double> dis;
    for (const auto& [text, emb] : descs) {
      rows.push_back({text, weighting ? compute_discriminability(emb, in.scenes) : Discriminability{}, 0.0});
      dis.push_back(rows.back().discriminability.dis);
    }
    const std::vector<double> w =
        weighting ? compute_weights(dis)
                  : std::vector<double>(rows.size(), 1.0 / static_cast<double>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].weight = w[i];
    table.verbs.emplace(verb, std::move(rows));
  }
  return table;
}

struct WeightArtifact {
  double lambda = 0.5;
  std::string backend_id;
  std::string class_prompt = kDefaultClassPrompt;
  bool verb_explainer = true;
  bool weighting = true;
  WeightTable table;

  json to_json() const {
    json verbs = json::object();
    for (const auto& [verb, rows] : table.verbs) {
      json descs = json::array();
      json dis = json::array();
      for (const DescriptionWeight& r : rows) {
        descs.push_back(json::array({r.description, r.weight}));
        dis.push_back(r.discriminability.dis);
      }
      verbs[verb] = {{"descriptions", std::move(descs)}, {"dis", std::move(dis)}};
    }
    return {{"lambda", lambda},         {"backend_id", backend_id}, {"class_prompt", class_prompt},
            {"verb_explainer", verb_explainer}, {"weighting", weighting}, {"verbs", std::move(verbs)}};
  }

  // Only the columns needed for scoring survive a round trip; rho vectors are
  // audit data and are not persisted.
  static WeightArtifact from_json(const json& j) {
    WeightArtifact a;
    try {
      a.lambda = j.at("lambda").get<double>();
      a.backend_id = j.at("backend_id").get<std::string>();
      a.class_prompt = j.value("class_prompt", std::string(kDefaultClassPrompt));
      a.verb_explainer = j.value("verb_explainer", true);
      a.weighting = j.value("weighting", true);
      for (const auto& [verb, jv] : j.at("verbs").items()) {
        std::vector<DescriptionWeight> rows;
        const json& descs = jv.at("descriptions");
        const json& dis = jv.at("dis");
        if (descs.size() != dis.size()) fail(ErrorCode::kLoadError, "weight artifact column mismatch");
        for (std::size_t i = 0; i < descs.size(); ++i) {
          DescriptionWeight r;
          r.description = descs[i].at(0).get<std::string>();
          r.weight = descs[i].at(1).get<double>();
          r.discriminability.dis = dis[i].get<double>();
          rows.push_back(std::move(r));
        }
        a.table.verbs.emplace(verb, std::move(rows));
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kLoadError, std::string("malformed weight artifact: ") + e.what());
    }
    return a;
  }
};

// ---------------------------------------------------------------------------
// Scoring

struct VerbPrompts {
  std::string verb;
  Embedding class_embedding;
  std::vector<Embedding> descriptions;
  std::vector<double> weights;
};

// Text-side embeddings of every verb, computed once per run and shared
// read-only across images.
struct VerbIndex {
  std::vector<VerbPrompts> entries;  // ascending verb id
};

// `weights` may be null (descriptions disabled); verbs missing from it are
// scored by their class prompt alone.
inline VerbIndex build_verb_index(std::span<const VerbClass> verbs, const WeightTable* weights,
                                  TextEmbeddingCache& embedder,
                                  std::string_view class_pattern = kDefaultClassPrompt) {
  std::vector<const VerbClass*> sorted;
  for (const VerbClass& v : verbs) sorted.push_back(&v);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id() < b->id(); });

  std::vector<std::string> texts;
  for (const VerbClass* v : sorted) {
    texts.push_back(class_prompt(class_pattern, v->display_name()));
    if (weights && weights->verbs.contains(v->id())) {
      for (const DescriptionWeight& r : weights->at(v->id())) texts.push_back(r.description);
    }
  }
  const std::vector<Embedding> embs = embedder.embed(texts);

  VerbIndex index;
  std::size_t cursor = 0;
  for (const VerbClass* v : sorted) {
    VerbPrompts p{v->id(), embs[cursor++], {}, {}};
    if (weights && weights->verbs.contains(v->id())) {
      for (const DescriptionWeight& r : weights->at(v->id())) {
        p.descriptions.push_back(embs[cursor++]);
        p.weights.push_back(r.weight);
      }
    }
    index.entries.push_back(std::move(p));
  }
  return index;
}

struct VerbScoreRow {
  std::string verb;
  double class_score = 0.0;
  double description_score = 0.0;
  double fused_score = 0.0;
};

struct VerbScoreTable {
  double lambda = 0.0;
  std::vector<VerbScoreRow> rows;    // ascending verb id
  std::vector<std::string> ranking;  // fused descending, ties by ascending id
};

inline VerbScoreTable score_verbs(const Embedding& image, const VerbIndex& index, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorCode::kInvalidArgument, "lambda must lie in [0,1]");
  VerbScoreTable table;
  table.lambda = lambda;
  for (const VerbPrompts& p : index.entries) {
    VerbScoreRow row{p.verb, cosine_similarity(image, p.class_embedding), 0.0, 0.0};
    if (p.descriptions.empty()) {
      row.description_score = row.class_score;
    } else {
      for (std::size_t i = 0; i < p.descriptions.size(); ++i) {
        row.description_score += p.weights[i] * cosine_similarity(image, p.descriptions[i]);
      }
    }
    row.fused_score = (1.0 - lambda) * row.class_score + lambda * row.description_score;
    table.rows.push_back(std::move(row));
  }
  std::vector<const VerbScoreRow*> order;
  for (const VerbScoreRow& r : table.rows) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const VerbScoreRow* a, const VerbScoreRow* b) {
    if (a->fused_score != b->fused_score) return a->fused_score > b->fused_score;
    return a->verb < b->verb;
  });
  for (const VerbScoreRow* r : order) table.ranking.push_back(r->verb);
  return table;
}

inline VerbScoreTable score_verbs(const Backend& backend, const ImageRef& image,
                                  const VerbIndex& index, double lambda) {
  return score_verbs(backend.embed_image(image), index, lambda);
}

inline std::vector<std::string> top_k(const VerbScoreTable& table, std::size_t k) {
  if (k == 0 || k > table.ranking.size()) {
    fail(ErrorCode::kInvalidArgument, "top_k needs 1 <= k <= |V|");
  }
  return {table.ranking.begin(), table.ranking.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace zsgsr
