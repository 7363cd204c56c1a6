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

// Prompt assembly for the three explainers, validation of their output, and
// the persistent content-addressed cache in front of the language backend.

#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <limits>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zsgsr/backends.hpp"
#include "zsgsr/core.hpp"
#include "zsgsr/json_io.hpp"
#include "zsgsr/log.hpp"

namespace zsgsr {

enum class PromptKind { kVerbCentric, kSceneText, kGroundingRephrase, kNounFilter, kNounScene };

inline constexpr PromptKind kAllPromptKinds[] = {PromptKind::kVerbCentric, PromptKind::kSceneText,
                                                 PromptKind::kGroundingRephrase, PromptKind::kNounFilter,
                                                 PromptKind::kNounScene};

inline const char* prompt_kind_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::kVerbCentric: return "verb_centric";
    case PromptKind::kSceneText: return "scene_text";
    case PromptKind::kGroundingRephrase: return "grounding_rephrase";
    case PromptKind::kNounFilter: return "noun_filter";
    case PromptKind::kNounScene: return "noun_scene";
  }
  return "unknown";
}

inline PromptKind prompt_kind_from_name(std::string_view name) {
  for (PromptKind k : kAllPromptKinds) {
    if (name == prompt_kind_name(k)) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown prompt kind '" + std::string(name) + "'");
}

// What a description set is about: a verb, or a (verb, role, noun) triple for
// scene-specific noun descriptions, or a bare role for noun filtering.
struct DescriptionSubject {
  std::string verb;
  std::optional<SemanticRole> role;
  std::optional<std::string> noun;

  std::string key() const {
    std::string k = verb;
    k += '\x1f';
    if (role) k += role->name();
    k += '\x1f';
    if (noun) k += *noun;
    return k;
  }

  json to_json() const {
    json j = json::object();
    if (!verb.empty()) j["verb"] = verb;
    if (role) j["role"] = role->name();
    if (noun) j["noun"] = *noun;
    return j;
  }

  friend bool operator==(const DescriptionSubject&, const DescriptionSubject&) = default;
};

struct DescriptionSet {
  PromptKind kind;
  DescriptionSubject subject;
  std::vector<std::string> descriptions;
  std::optional<std::vector<double>> weights;

  void validate() const {
    if (descriptions.empty()) fail(ErrorCode::kInvalidArgument, "description set is empty");
    for (const std::string& d : descriptions) {
      if (trim(d).empty()) fail(ErrorCode::kInvalidArgument, "description set holds an empty string");
    }
    if (weights) {
      if (weights->size() != descriptions.size()) {
        fail(ErrorCode::kInvalidArgument, "weights and descriptions differ in length");
      }
      double sum = 0.0;
      for (double w : *weights) {
        if (!(w > 0.0 && w <= 1.0)) fail(ErrorCode::kInvalidArgument, "weight outside (0,1]");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::kInvalidArgument, "weights do not sum to 1");
    }
  }

  friend bool operator==(const DescriptionSet&, const DescriptionSet&) = default;
};

// ---------------------------------------------------------------------------
// Prompts

struct InContextExample {
  std::string input;
  std::string output;
};

struct PromptSpec {
  std::string instruction;
  std::vector<InContextExample> examples;
  int count = 1;
};

inline std::vector<std::string> mandatory_placeholders(PromptKind kind) {
  switch (kind) {
    case PromptKind::kVerbCentric:
    case PromptKind::kSceneText: return {"{CLASS}"};
    case PromptKind::kGroundingRephrase: return {"{TEMPLATE}", "{SEMANTIC ROLES}"};
    case PromptKind::kNounFilter: return {"{NOUN LIST}", "{SEMANTIC ROLE}"};
    case PromptKind::kNounScene: return {"{CLASS}", "{SEMANTIC ROLE}", "{TEMPLATE}"};
  }
  return {};
}

// Values substituted into an instruction. Unused fields stay empty.
struct PromptContext {
  std::string class_name;
  std::string template_text;
  std::string semantic_roles;
  std::string semantic_role;
  std::string noun_list;
  int count = 1;
};

inline std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

struct PromptTemplateConfig {
  std::map<PromptKind, PromptSpec> specs;

  // Re-authored defaults. Counts: 10 verb descriptions and scene texts, 5
  // rephrasings and noun descriptions.
  static PromptTemplateConfig defaults() {
    PromptTemplateConfig c;
    c.specs[PromptKind::kVerbCentric] = PromptSpec{
        "Which visual features help to recognize the event '{CLASS}' ({TEMPLATE})? "
        "Answer with {COUNT} short phrases, one per line.",
        {{"cooking (the AGENT cooks FOOD in a PLACE)",
          "a pan or pot over a flame\nsteam rising from food\na hand stirring with a spoon"}},
        10};
    c.specs[PromptKind::kSceneText] = PromptSpec{
        "Write {COUNT} different sentences, each describing a concrete photo of someone {CLASS} "
        "({TEMPLATE}). Mention the people, objects and place. One sentence per line.",
        {{"cooking (the AGENT cooks FOOD in a PLACE)",
          "A man in an apron fries eggs in a small apartment kitchen.\n"
          "Two chefs stir large pots of soup in a busy restaurant kitchen."}},
        10};
    c.specs[PromptKind::kGroundingRephrase] = PromptSpec{
        "Rewrite this sentence in {COUNT} more detailed ways that are easier to understand: "
        "{TEMPLATE}. Every rewrite must keep these words unchanged: {SEMANTIC ROLES}. "
        "One rewrite per line.",
        {{"the AGENT cooks FOOD in a PLACE",
          "the AGENT stands at the stove and cooks the FOOD inside a PLACE"}},
        5};
    c.specs[PromptKind::kNounFilter] = PromptSpec{
        "Entity list: {NOUN LIST}. Which of these entities are most likely to fill the "
        "semantic role {SEMANTIC ROLE}? Answer only with entities from the list, one per line.",
        {},
        1};
    c.specs[PromptKind::kNounScene] = PromptSpec{
        "Describe visual features that distinguish the entity '{CLASS}' acting as "
        "{SEMANTIC ROLE} in the scene: {TEMPLATE}. Answer with {COUNT} short phrases, one per line.",
        {{"'spoon' acting as TOOL in the scene: the AGENT cooks FOOD in a PLACE",
          "a metal spoon dipped into a pot\nheld by the handle over the stove"}},
        5};
    return c;
  }

  const PromptSpec& spec(PromptKind kind) const {
    auto it = specs.find(kind);
    if (it == specs.end()) {
      fail(ErrorCode::kInvalidArgument, std::string("no prompt configured for ") + prompt_kind_name(kind));
    }
    return it->second;
  }

  void validate() const {
    for (PromptKind k : kAllPromptKinds) {
      const PromptSpec& s = spec(k);
      for (const std::string& p : mandatory_placeholders(k)) {
        if (s.instruction.find(p) == std::string::npos) {
          fail(ErrorCode::kInvalidArgument,
               std::string(prompt_kind_name(k)) + " prompt lacks placeholder " + p);
        }
      }
      if (s.count < 1) fail(ErrorCode::kInvalidArgument, "generation counts must be >= 1");
    }
  }

  std::string render(PromptKind kind, const PromptContext& ctx) const {
    const PromptSpec& s = spec(kind);
    std::string out;
    for (const InContextExample& ex : s.examples) {
      out += "Input: " + ex.input + "\nOutput:\n" + ex.output + "\n\n";
    }
    std::string instr = s.instruction;
    instr = replace_all(std::move(instr), "{CLASS}", ctx.class_name);
    instr = replace_all(std::move(instr), "{TEMPLATE}", ctx.template_text);
    instr = replace_all(std::move(instr), "{SEMANTIC ROLES}", ctx.semantic_roles);
    instr = replace_all(std::move(instr), "{SEMANTIC ROLE}", ctx.semantic_role);
    instr = replace_all(std::move(instr), "{NOUN LIST}", ctx.noun_list);
    instr = replace_all(std::move(instr), "{COUNT}", std::to_string(ctx.count));
    out += instr;
    return out;
  }

  // Overlays `{"<kind>": {"instruction", "examples": [[in, out]], "count"}}`.
  void merge_json(const json& j) {
    for (const auto& [name, js] : j.items()) {
      PromptSpec& s = specs[prompt_kind_from_name(name)];
      if (js.contains("instruction")) s.instruction = js.at("instruction").get<std::string>();
      if (js.contains("count")) s.count = js.at("count").get<int>();
      if (js.contains("examples")) {
        s.examples.clear();
        for (const json& e : js.at("examples")) {
          s.examples.push_back({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
        }
      }
    }
    validate();
  }
};

// Splits completions into lines, strips list markers and whitespace, drops
// empties and duplicates, and keeps at most `limit` entries.
inline std::vector<std::string> clean_completions(const std::vector<std::string>& raw,
                                                  std::size_t limit) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const std::string& completion : raw) {
    std::size_t start = 0;
    while (start <= completion.size()) {
      std::size_t end = completion.find('\n', start);
      if (end == std::string::npos) end = completion.size();
      std::string line = trim(std::string_view(completion).substr(start, end - start));
      start = end + 1;
      // A marker is followed by a space or ends the line.
      auto marker_end = [&](std::size_t i) { return i == line.size() || line[i] == ' '; };
      if (!line.empty() && (line[0] == '-' || line[0] == '*') && marker_end(1)) {
        line = trim(line.substr(1));
      } else {
        std::size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')') && marker_end(i + 1)) {
          line = trim(line.substr(i + 1));
        }
      }
      if (line.empty() || !seen.insert(line).second) continue;
      out.push_back(std::move(line));
      if (out.size() >= limit) return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cache

// One JSON file per key at <root>/<kind>/<sha256>.json. An empty root keeps
// entries in memory only. Concurrent misses on one key run the generator once.
class DescriptionCache {
 public:
  explicit DescriptionCache(std::filesystem::path root = {}) : root_(std::move(root)) {}

  static std::string key(PromptKind kind, const DescriptionSubject& subject,
                         const std::string& prompt, const std::string& backend_id) {
    std::string material = prompt_kind_name(kind);
    material += '\x1e';
    material += subject.key();
    material += '\x1e';
    material += prompt;
    material += '\x1e';
    material += backend_id;
    return sha256_hex(material);
  }

  std::filesystem::path path_for(PromptKind kind, const std::string& key) const {
    return root_ / prompt_kind_name(kind) / (key + ".json");
  }

  const std::filesystem::path& root() const { return root_; }

  std::vector<std::string> get_or_generate(PromptKind kind, const DescriptionSubject& subject,
                                           const std::string& prompt, const std::string& backend_id,
                                           const std::function<std::vector<std::string>()>& generate) {
    const std::string k = key(kind, subject, prompt, backend_id);
    std::promise<std::vector<std::string>> promise;
    {
      std::unique_lock<std::mutex> lock(mu_);
      if (auto it = memory_.find(k); it != memory_.end()) return it->second;
      if (auto it = inflight_.find(k); it != inflight_.end()) {
        auto fut = it->second;
        lock.unlock();
        return fut.get();
      }
      if (auto stored = read_disk(kind, k)) {
        memory_.emplace(k, *stored);
        return *stored;
      }
      inflight_.emplace(k, promise.get_future().share());
    }
    try {
      std::vector<std::string> value = generate();
      write_disk(kind, k, subject, prompt, backend_id, value);
      {
        std::lock_guard<std::mutex> lock(mu_);
        memory_.emplace(k, value);
        inflight_.erase(k);
      }
      promise.set_value(value);
      return value;
    } catch (...) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        inflight_.erase(k);
      }
      promise.set_exception(std::current_exception());
      throw;
    }
  }

 private:
  std::optional<std::vector<std::string>> read_disk(PromptKind kind, const std::string& k) const {
    if (root_.empty()) return std::nullopt;
    const auto path = path_for(kind, k);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      const json j = json::parse(read_file(path));
      return j.at("descriptions").get<std::vector<std::string>>();
    } catch (const std::exception& e) {
      log::warning("ignoring unreadable cache entry " + path.string() + ": " + e.what());
      return std::nullopt;
    }
  }

  void write_disk(PromptKind kind, const std::string& k, const DescriptionSubject& subject,
                  const std::string& prompt, const std::string& backend_id,
                  const std::vector<std::string>& value) const {
    if (root_.empty()) return;
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
    const json j = {{"subject", subject.to_json()},
                    {"prompt", prompt},
                    {"descriptions", value},
                    {"created_at", stamp},
                    {"backend_id", backend_id}};
    write_file_atomic(path_for(kind, k), j.dump(2) + "\n");
  }

  std::filesystem::path root_;
  std::mutex mu_;
  std::unordered_map<std::string, std::vector<std::string>> memory_;
  std::unordered_map<std::string, std::shared_future<std::vector<std::string>>> inflight_;
};

// ---------------------------------------------------------------------------
// Explainers

inline std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::string role_list(const VerbClass& verb) {
  std::vector<std::string> names;
  for (const SemanticRole& r : verb.roles()) names.push_back(r.name());
  return join(names, ", ");
}

inline std::string render_verb_prompt(const PromptTemplateConfig& prompts, PromptKind kind,
                                      const VerbClass& verb) {
  PromptContext ctx;
  ctx.class_name = verb.display_name();
  ctx.template_text = verb.template_text();
  ctx.semantic_roles = role_list(verb);
  ctx.count = prompts.spec(kind).count;
  return prompts.render(kind, ctx);
}

inline std::string render_filter_prompt(const PromptTemplateConfig& prompts, const SemanticRole& role,
                                        std::span<const NounClass> nouns) {
  std::vector<std::string> glosses;
  std::set<std::string> seen;
  for (const NounClass& n : nouns) {
    if (seen.insert(n.gloss).second) glosses.push_back(n.gloss);
  }
  PromptContext ctx;
  ctx.semantic_role = role.name();
  ctx.noun_list = join(glosses, ", ");
  ctx.count = prompts.spec(PromptKind::kNounFilter).count;
  return prompts.render(PromptKind::kNounFilter, ctx);
}

inline std::string render_noun_prompt(const PromptTemplateConfig& prompts, const VerbClass& verb,
                                      const SemanticRole& role, const NounClass& noun) {
  PromptContext ctx;
  ctx.class_name = noun.gloss;
  ctx.template_text = verb.template_text();
  ctx.semantic_roles = role_list(verb);
  ctx.semantic_role = role.name();
  ctx.count = prompts.spec(PromptKind::kNounScene).count;
  return prompts.render(PromptKind::kNounScene, ctx);
}

class Explainer {
 public:
  Explainer(const Backend& backend, PromptTemplateConfig prompts, DescriptionCache& cache)
      : backend_(backend), prompts_(std::move(prompts)), cache_(cache) {
    prompts_.validate();
  }

  const PromptTemplateConfig& prompts() const { return prompts_; }

  DescriptionSet generate_verb_descriptions(const VerbClass& verb) {
    return generate_verb_set(PromptKind::kVerbCentric, verb);
  }

  // Scene sentences embedded as stand-ins for annotated images when weighting
  // verb descriptions.
  DescriptionSet generate_scene_texts(const VerbClass& verb) {
    return generate_verb_set(PromptKind::kSceneText, verb);
  }

  // Never fails: rephrasings that drop a role token are discarded, and an
  // empty result degrades to the original template.
  DescriptionSet rephrase_template(const VerbClass& verb) {
    DescriptionSet set{PromptKind::kGroundingRephrase, {verb.id(), {}, {}}, {}, {}};
    try {
      const auto raw = cached(PromptKind::kGroundingRephrase, set.subject,
                              render_verb_prompt(prompts_, PromptKind::kGroundingRephrase, verb));
      for (std::string& d : clean_completions(raw, limit(PromptKind::kGroundingRephrase))) {
        const bool keeps_roles =
            std::all_of(verb.roles().begin(), verb.roles().end(),
                        [&](const SemanticRole& r) { return contains_token(d, r.name()); });
        if (keeps_roles) set.descriptions.push_back(std::move(d));
      }
    } catch (const Error& e) {
      log::warning("rephrasing '" + verb.id() + "' failed, using its template: " + e.what());
    }
    if (set.descriptions.empty()) set.descriptions.push_back(verb.template_text());
    return set;
  }

  // Nouns whose gloss the explainer names as plausible for `role`. Fails open
  // to the full vocabulary.
  std::set<std::string> filter_nouns(const SemanticRole& role, std::span<const NounClass> vocab) {
    if (vocab.empty()) fail(ErrorCode::kInvalidArgument, "filter_nouns needs a vocabulary");
    std::set<std::string> kept;
    try {
      const auto raw = cached(PromptKind::kNounFilter, {"", role, {}}, render_filter_prompt(prompts_, role, vocab));
      std::set<std::string> answers;
      for (const std::string& line : clean_completions(raw, std::numeric_limits<std::size_t>::max())) {
        std::size_t start = 0;
        while (start <= line.size()) {
          std::size_t end = line.find(',', start);
          if (end == std::string::npos) end = line.size();
          answers.insert(trim(std::string_view(line).substr(start, end - start)));
          start = end + 1;
        }
      }
      for (const NounClass& n : vocab) {
        if (answers.contains(n.gloss)) kept.insert(n.id);
      }
    } catch (const Error& e) {
      log::warning("noun filtering for " + role.name() + " failed: " + e.what());
    }
    if (kept.empty()) {
      for (const NounClass& n : vocab) kept.insert(n.id);
    }
    return kept;
  }

  DescriptionSet generate_noun_descriptions(const VerbClass& verb, const SemanticRole& role,
                                            const NounClass& noun) {
    if (!verb.has_role(role)) {
      fail(ErrorCode::kInvalidArgument, role.name() + " is not a role of '" + verb.id() + "'");
    }
    DescriptionSet set{PromptKind::kNounScene, {verb.id(), role, noun.id}, {}, {}};
    const auto raw = cached(PromptKind::kNounScene, set.subject, render_noun_prompt(prompts_, verb, role, noun));
    set.descriptions = clean_completions(raw, limit(PromptKind::kNounScene));
    if (set.descriptions.empty()) {
      fail(ErrorCode::kGenerationFailed, "no usable descriptions for (" + verb.id() + ", " +
                                             role.name() + ", " + noun.id + ")");
    }
    return set;
  }

 private:
  std::size_t limit(PromptKind kind) const {
    return static_cast<std::size_t>(prompts_.spec(kind).count);
  }

  std::vector<std::string> cached(PromptKind kind, const DescriptionSubject& subject,
                                  const std::string& prompt) {
    const int n = prompts_.spec(kind).count;
    return cache_.get_or_generate(kind, subject, prompt, backend_.identity(),
                                  [&] { return backend_.explain(prompt, n); });
  }

  DescriptionSet generate_verb_set(PromptKind kind, const VerbClass& verb) {
    DescriptionSet set{kind, {verb.id(), {}, {}}, {}, {}};
    const auto raw = cached(kind, set.subject, render_verb_prompt(prompts_, kind, verb));
    set.descriptions = clean_completions(raw, limit(kind));
    if (set.descriptions.empty()) {
      fail(ErrorCode::kGenerationFailed,
           std::string("no usable ") + prompt_kind_name(kind) + " output for '" + verb.id() + "'");
    }
    return set;
  }

  const Backend& backend_;
  PromptTemplateConfig prompts_;
  DescriptionCache& cache_;
};

}  // namespace zsgsr
