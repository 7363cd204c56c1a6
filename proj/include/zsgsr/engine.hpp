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

// Batch orchestration behind the command line: configuration, the offline
// precompute pass, per-image prediction, resumable runs and evaluation.

#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "zsgsr/backends.hpp"
#include "zsgsr/dataset_io.hpp"
#include "zsgsr/evaluator.hpp"
#include "zsgsr/explainers.hpp"
#include "zsgsr/fixture_backend.hpp"
#include "zsgsr/http_backend.hpp"
#include "zsgsr/json_io.hpp"
#include "zsgsr/log.hpp"
#include "zsgsr/noun_recognizer.hpp"
#include "zsgsr/role_grounder.hpp"
#include "zsgsr/verb_recognizer.hpp"

namespace zsgsr {

// Runs f(0..n-1) on up to `jobs` threads. The first exception thrown by any
// call is rethrown after all workers have stopped.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> workers;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t w = 0; w < count; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            f(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Configuration

enum class BackendKind { kFixture, kHttp };

// Component switches. Everything off with lambda = 0 is the class-prompt
// baseline.
struct AblationFlags {
  bool verb_explainer = true;
  bool weighting = true;
  bool grounding_explainer = true;
  bool noun_filter = true;
  bool noun_explainer = true;
  bool refine = true;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct EngineConfig {
  BackendKind backend = BackendKind::kFixture;
  std::string endpoint;
  std::filesystem::path fixture;
  double lambda = 0.5;
  PromptTemplateConfig prompts = PromptTemplateConfig::defaults();
  std::string class_prompt = kDefaultClassPrompt;
  // Empty keeps explainer output in memory only.
  std::filesystem::path cache_dir;
  // Defaults to <cache_dir>/weights.json.
  std::filesystem::path weights_path;
  int jobs = 1;
  std::vector<Setting> settings = {Setting::kTop1, Setting::kTop5, Setting::kGt};
  AblationFlags flags;
  EvalOptions eval;
  double min_confidence = 0.0;

  std::filesystem::path resolved_weights_path() const {
    if (!weights_path.empty()) return weights_path;
    if (!cache_dir.empty()) return cache_dir / "weights.json";
    return "weights.json";
  }

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorCode::kInvalidArgument, "lambda must lie in [0,1]");
    if (jobs < 1) fail(ErrorCode::kInvalidArgument, "jobs must be >= 1");
    if (settings.empty()) fail(ErrorCode::kInvalidArgument, "no evaluation settings selected");
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "min_confidence must lie in [0,1]");
    }
    if (backend == BackendKind::kHttp && endpoint.empty()) {
      fail(ErrorCode::kInvalidArgument, "http backend needs an endpoint");
    }
    if (backend == BackendKind::kFixture && fixture.empty()) {
      fail(ErrorCode::kInvalidArgument, "fixture backend needs a fixture file");
    }
    prompts.validate();
  }

  // Overlays the keys present in a config document onto this config.
  void merge_json(const json& j) {
    try {
      if (j.contains("backend")) backend = backend_from_name(j.at("backend").get<std::string>());
      if (j.contains("endpoint")) endpoint = j.at("endpoint").get<std::string>();
      if (j.contains("fixture")) fixture = j.at("fixture").get<std::string>();
      if (j.contains("lambda")) lambda = j.at("lambda").get<double>();
      if (j.contains("class_prompt")) class_prompt = j.at("class_prompt").get<std::string>();
      if (j.contains("cache_dir")) cache_dir = j.at("cache_dir").get<std::string>();
      if (j.contains("weights")) weights_path = j.at("weights").get<std::string>();
      if (j.contains("jobs")) jobs = j.at("jobs").get<int>();
      if (j.contains("min_confidence")) min_confidence = j.at("min_confidence").get<double>();
      if (j.contains("settings")) settings = parse_settings(j.at("settings").get<std::vector<std::string>>());
      if (j.contains("grnd")) eval.grounding = grounding_from_name(j.at("grnd").get<std::string>());
      if (j.contains("absent_box")) eval.absent_box = absent_box_from_name(j.at("absent_box").get<std::string>());
      if (j.contains("prompts")) prompts.merge_json(j.at("prompts"));
      if (j.contains("flags")) {
        const json& f = j.at("flags");
        flags.verb_explainer = f.value("verb_explainer", flags.verb_explainer);
        flags.weighting = f.value("weighting", flags.weighting);
        flags.grounding_explainer = f.value("grounding_explainer", flags.grounding_explainer);
        flags.noun_filter = f.value("noun_filter", flags.noun_filter);
        flags.noun_explainer = f.value("noun_explainer", flags.noun_explainer);
        flags.refine = f.value("refine", flags.refine);
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidArgument, std::string("bad config: ") + e.what());
    }
  }

  // ZSGSR_BACKEND, ZSGSR_ENDPOINT, ZSGSR_FIXTURE, ZSGSR_CACHE_DIR.
  void apply_environment() {
    if (const char* v = std::getenv("ZSGSR_BACKEND"); v && *v) backend = backend_from_name(v);
    if (const char* v = std::getenv("ZSGSR_ENDPOINT"); v && *v) endpoint = v;
    if (const char* v = std::getenv("ZSGSR_FIXTURE"); v && *v) fixture = v;
    if (const char* v = std::getenv("ZSGSR_CACHE_DIR"); v && *v) cache_dir = v;
  }

  static BackendKind backend_from_name(std::string_view name) {
    if (name == "fixture") return BackendKind::kFixture;
    if (name == "http") return BackendKind::kHttp;
    fail(ErrorCode::kInvalidArgument, "unknown backend '" + std::string(name) + "'");
  }

  static GroundingMode grounding_from_name(std::string_view name) {
    if (name == "joint") return GroundingMode::kJoint;
    if (name == "box-only") return GroundingMode::kBoxOnly;
    fail(ErrorCode::kInvalidArgument, "unknown grounding mode '" + std::string(name) + "'");
  }

  static AbsentBoxMode absent_box_from_name(std::string_view name) {
    if (name == "strict") return AbsentBoxMode::kStrict;
    if (name == "ignore") return AbsentBoxMode::kIgnore;
    fail(ErrorCode::kInvalidArgument, "unknown absent-box mode '" + std::string(name) + "'");
  }

  static std::vector<Setting> parse_settings(const std::vector<std::string>& names) {
    std::set<Setting> seen;
    for (const std::string& n : names) seen.insert(setting_from_name(n));
    return {seen.begin(), seen.end()};
  }
};

inline std::unique_ptr<Backend> make_backend(const EngineConfig& config) {
  if (config.backend == BackendKind::kHttp) return std::make_unique<HttpBackend>(config.endpoint);
  return std::make_unique<FixtureBackend>(FixtureDocument::from_json(read_json_file(config.fixture)));
}

// ---------------------------------------------------------------------------
// Engine

struct PrecomputeSummary {
  std::size_t verbs = 0;
  std::vector<std::string> failures;  // one line per degraded class
};

struct RunSummary {
  std::size_t images = 0;
  std::size_t written = 0;
  std::size_t reused = 0;
  std::vector<std::string> failures;
};

class Engine {
 public:
  Engine(EngineConfig config, const Backend& backend, const DatasetBundle& bundle)
      : config_(std::move(config)),
        backend_(backend),
        bundle_(bundle),
        cache_(config_.cache_dir.empty() ? std::filesystem::path() : config_.cache_dir / "descriptions"),
        explainer_(backend_, config_.prompts, cache_),
        embedder_(backend_),
        nouns_(backend_, embedder_, &explainer_, bundle_.nouns,
               NounScoringOptions{config_.lambda, config_.flags.noun_explainer, config_.class_prompt}),
        noun_list_(bundle_.noun_list()) {
    config_.validate();
    if (bundle_.verbs.empty() || bundle_.nouns.empty()) {
      fail(ErrorCode::kDataError, "vocabulary has no verbs or no nouns");
    }
  }

  const EngineConfig& config() const { return config_; }
  Explainer& explainer() { return explainer_; }

  // Generates and caches every class-level explainer output, then computes
  // and persists the verb description weights. Classes whose generation fails
  // fall back to their class prompt and are reported in the summary.
  PrecomputeSummary precompute() {
    const std::vector<VerbClass> verbs = bundle_.verb_list();
    PrecomputeSummary summary;
    summary.verbs = verbs.size();
    std::vector<std::vector<std::string>> descriptions(verbs.size());
    std::vector<std::vector<std::string>> scenes(verbs.size());
    std::mutex mu;
    auto note = [&](const std::string& line) {
      std::lock_guard<std::mutex> lock(mu);
      summary.failures.push_back(line);
      log::warning(line);
    };
    parallel_for(verbs.size(), config_.jobs, [&](std::size_t i) {
      const VerbClass& v = verbs[i];
      const std::string fallback = class_prompt(config_.class_prompt, v.display_name());
      if (config_.flags.verb_explainer) {
        try {
          descriptions[i] = explainer_.generate_verb_descriptions(v).descriptions;
        } catch (const Error& e) {
          note("verb '" + v.id() + "' descriptions: " + e.what());
          descriptions[i] = {fallback};
        }
        if (config_.flags.weighting) {
          try {
            scenes[i] = explainer_.generate_scene_texts(v).descriptions;
          } catch (const Error& e) {
            note("verb '" + v.id() + "' scene texts: " + e.what());
            scenes[i] = {fallback};
          }
        }
      }
      if (config_.flags.grounding_explainer) explainer_.rephrase_template(v);
    });
    if (config_.flags.noun_filter) {
      std::set<SemanticRole> roles;
      for (const VerbClass& v : verbs) roles.insert(v.roles().begin(), v.roles().end());
      const std::vector<SemanticRole> role_list(roles.begin(), roles.end());
      parallel_for(role_list.size(), config_.jobs, [&](std::size_t i) { allowed_nouns(role_list[i]); });
    }
    std::sort(summary.failures.begin(), summary.failures.end());

    WeightArtifact artifact;
    artifact.lambda = config_.lambda;
    artifact.backend_id = backend_.identity();
    artifact.class_prompt = config_.class_prompt;
    artifact.verb_explainer = config_.flags.verb_explainer;
    artifact.weighting = config_.flags.weighting;
    if (config_.flags.verb_explainer) {
      WeightInputs inputs;
      for (std::size_t i = 0; i < verbs.size(); ++i) {
        const auto embs = embedder_.embed(descriptions[i]);
        auto& rows = inputs.descriptions[verbs[i].id()];
        for (std::size_t d = 0; d < embs.size(); ++d) rows.emplace_back(descriptions[i][d], embs[d]);
        if (config_.flags.weighting) inputs.scenes[verbs[i].id()] = embedder_.embed(scenes[i]);
      }
      artifact.table = build_weight_table(inputs, config_.flags.weighting);
    }
    write_file_atomic(config_.resolved_weights_path(), artifact.to_json().dump(2) + "\n");
    index_.reset();
    return summary;
  }

  // Loads the weight artifact (when verb descriptions are enabled) and embeds
  // every verb prompt once.
  void prepare() {
    if (index_) return;
    std::optional<WeightArtifact> artifact;
    if (config_.flags.verb_explainer) {
      const auto path = config_.resolved_weights_path();
      if (!std::filesystem::exists(path)) {
        fail(ErrorCode::kDataError, "no weight artifact at " + path.string() + "; run precompute first");
      }
      artifact = WeightArtifact::from_json(read_json_file(path));
      if (artifact->backend_id != backend_.identity()) {
        log::warning("weight artifact was computed with backend " + artifact->backend_id);
      }
    }
    const std::vector<VerbClass> verbs = bundle_.verb_list();
    index_ = build_verb_index(verbs, artifact ? &artifact->table : nullptr, embedder_, config_.class_prompt);
  }

  VerbScoreTable score_image_verbs(const Embedding& image) {
    prepare();
    return score_verbs(image, *index_, config_.lambda);
  }

  PredictionRecord predict(const FrameAnnotation& annotation) {
    prepare();
    const ImageRef image(bundle_.image_uri(annotation.image_id));
    const Embedding image_emb = backend_.embed_image(image);
    const VerbScoreTable table = score_verbs(image_emb, *index_, config_.lambda);

    PredictionRecord record;
    record.image_id = annotation.image_id;
    record.top_verbs = top_k(table, std::min(kTopFive, table.ranking.size()));

    std::map<std::string, PredictedFrame> frames;
    auto frame_for = [&](const std::string& verb_id) -> const PredictedFrame& {
      auto it = frames.find(verb_id);
      if (it == frames.end()) it = frames.emplace(verb_id, predict_frame(image, image_emb, bundle_.verb(verb_id))).first;
      return it->second;
    };
    for (Setting s : config_.settings) {
      switch (s) {
        case Setting::kTop1:
          record.frames.emplace(s, frame_for(record.top_verbs.front()));
          break;
        case Setting::kTop5:
          if (verb_in_top(record.top_verbs, annotation.verb, kTopFive)) {
            record.frames.emplace(s, frame_for(annotation.verb));
          }
          break;
        case Setting::kGt:
          record.frames.emplace(s, frame_for(annotation.verb));
          break;
      }
    }
    return record;
  }

  // Grounds, classifies and refines the roles of `verb` in one image.
  PredictedFrame predict_frame(const ImageRef& image, const Embedding& image_emb, const VerbClass& verb) {
    const DescriptionSet rephrasings =
        config_.flags.grounding_explainer
            ? explainer_.rephrase_template(verb)
            : DescriptionSet{PromptKind::kGroundingRephrase, {verb.id(), {}, {}}, {verb.template_text()}, {}};
    const std::vector<CandidateBox> candidates =
        ground_candidates(backend_, image, verb, rephrasings, GroundingOptions{config_.min_confidence});

    using BoxKey = std::tuple<std::string, double, double, double, double>;
    std::map<BoxKey, std::vector<RankedNoun>> seen;
    std::vector<NounPrePrediction> preds;
    std::set<SemanticRole> grounded;
    for (const CandidateBox& c : candidates) {
      grounded.insert(c.role);
      const BoxKey key{c.role.name(), c.box.x1(), c.box.y1(), c.box.x2(), c.box.y2()};
      auto it = seen.find(key);
      if (it == seen.end()) {
        NounPrePrediction p = nouns_.pre_predict(image, c, verb, allowed_nouns(c.role));
        it = seen.emplace(key, p.ranked_nouns).first;
      }
      preds.push_back(NounPrePrediction{c.role, c, it->second});
    }
    std::map<SemanticRole, NounPrePrediction> fallbacks;
    for (const SemanticRole& r : verb.roles()) {
      if (grounded.contains(r)) continue;
      fallbacks.emplace(r, nouns_.pre_predict_region(image_emb, std::nullopt, r, verb, allowed_nouns(r)));
    }
    const auto refined = config_.flags.refine ? nouns_.refine(image_emb, verb, preds, fallbacks)
                                              : nouns_.select_by_confidence(verb, preds, fallbacks);
    return assemble_frame(verb, refined, &bundle_.nouns);
  }

  std::set<std::string> allowed_nouns(const SemanticRole& role) {
    {
      std::lock_guard<std::mutex> lock(filter_mu_);
      if (auto it = filtered_.find(role); it != filtered_.end()) return it->second;
    }
    std::set<std::string> allowed;
    if (config_.flags.noun_filter) {
      allowed = explainer_.filter_nouns(role, noun_list_);
    } else {
      for (const NounClass& n : noun_list_) allowed.insert(n.id);
    }
    std::lock_guard<std::mutex> lock(filter_mu_);
    return filtered_.try_emplace(role, std::move(allowed)).first->second;
  }

  // Predicts every annotated image and writes the JSON-lines file. Finished
  // images are kept under <output>.parts/ so an interrupted run resumes where
  // it stopped; records already in `output` are reused as well.
  RunSummary run(const std::filesystem::path& output) {
    namespace fs = std::filesystem;
    prepare();
    RunSummary summary;
    summary.images = bundle_.annotations.size();

    std::map<std::string, std::string> done;  // image id -> serialized record
    if (fs::exists(output)) {
      try {
        for (const PredictionRecord& r : load_predictions(output)) done.emplace(r.image_id, record_to_json(r).dump());
      } catch (const Error& e) {
        log::warning("ignoring unreadable previous output: " + std::string(e.what()));
        done.clear();
      }
    }
    const fs::path parts = fs::path(output.string() + ".parts");
    auto part_path = [&](const std::string& id) { return parts / (sha256_hex(id).substr(0, 32) + ".json"); };

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < bundle_.annotations.size(); ++i) {
      const std::string& id = bundle_.annotations[i].image_id;
      if (done.contains(id)) {
        ++summary.reused;
        continue;
      }
      if (fs::exists(part_path(id))) {
        try {
          const PredictionRecord r = record_from_json(read_json_file(part_path(id)));
          if (r.image_id == id) {
            done.emplace(id, record_to_json(r).dump());
            ++summary.reused;
            continue;
          }
        } catch (const std::exception&) {
        }
      }
      pending.push_back(i);
    }

    std::mutex mu;
    std::atomic<std::size_t> finished{0};
    parallel_for(pending.size(), config_.jobs, [&](std::size_t k) {
      const FrameAnnotation& ann = bundle_.annotations[pending[k]];
      try {
        const std::string line = record_to_json(predict(ann)).dump();
        write_file_atomic(part_path(ann.image_id), line + "\n");
        std::lock_guard<std::mutex> lock(mu);
        done.emplace(ann.image_id, line);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        summary.failures.push_back(ann.image_id + ": " + e.what());
        log::error(ann.image_id + ": " + e.what());
      }
      const std::size_t n = ++finished;
      if (n % 100 == 0 || n == pending.size()) {
        log::info("predicted " + std::to_string(n) + "/" + std::to_string(pending.size()) + " images");
      }
    });
    std::sort(summary.failures.begin(), summary.failures.end());

    std::string content;
    for (const FrameAnnotation& ann : bundle_.annotations) {
      if (auto it = done.find(ann.image_id); it != done.end()) {
        content += it->second;
        content += '\n';
        ++summary.written;
      }
    }
    write_file_atomic(output, content);
    if (summary.failures.empty()) {
      std::error_code ec;
      fs::remove_all(parts, ec);
    }
    return summary;
  }

 private:
  EngineConfig config_;
  const Backend& backend_;
  const DatasetBundle& bundle_;
  DescriptionCache cache_;
  Explainer explainer_;
  TextEmbeddingCache embedder_;
  NounRecognizer nouns_;
  std::vector<NounClass> noun_list_;
  std::optional<VerbIndex> index_;
  std::mutex filter_mu_;
  std::map<SemanticRole, std::set<std::string>> filtered_;
};

// Scores a prediction file against the dataset. Images without a prediction
// count as wrong everywhere; predictions for unknown images are a data error.
inline MetricsReport evaluate_predictions(std::span<const PredictionRecord> records, const DatasetBundle& bundle,
                                          std::span<const Setting> settings, const EvalOptions& options = {}) {
  std::map<std::string, const PredictionRecord*> by_id;
  for (const PredictionRecord& r : records) {
    if (!by_id.emplace(r.image_id, &r).second) {
      fail(ErrorCode::kDataError, "duplicate prediction for '" + r.image_id + "'");
    }
  }
  std::set<std::string> annotated;
  std::vector<ImageScore> scores;
  for (const FrameAnnotation& ann : bundle.annotations) {
    annotated.insert(ann.image_id);
    auto it = by_id.find(ann.image_id);
    if (it == by_id.end()) {
      log::warning("no prediction for '" + ann.image_id + "'");
      scores.push_back(missing_image_score(ann, bundle.verb(ann.verb), settings, options));
      continue;
    }
    scores.push_back(score_image(*it->second, ann, bundle.verb(ann.verb), settings, options));
  }
  for (const auto& [id, r] : by_id) {
    if (!annotated.contains(id)) fail(ErrorCode::kDataError, "prediction for unannotated image '" + id + "'");
  }
  return aggregate(scores);
}

}  // namespace zsgsr
