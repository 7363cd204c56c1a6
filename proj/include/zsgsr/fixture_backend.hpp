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

// Deterministic test double for all three model interfaces. Every answer is a
// pure function of the fixture document and the call arguments.

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "zsgsr/backends.hpp"
#include "zsgsr/json_io.hpp"

namespace zsgsr {

inline constexpr std::size_t kDefaultFixtureDim = 64;

struct FixtureRegion {
  BoundingBox box;
  Embedding embedding;
  std::string phrase;
  double score;
};

struct FixtureImage {
  Embedding global_embedding;
  std::vector<FixtureRegion> regions;
};

struct FixtureDocument {
  std::size_t dim = kDefaultFixtureDim;
  std::map<std::string, Embedding> texts;
  std::map<std::string, FixtureImage> images;
  // prompt digest -> scripted completions
  std::map<std::string, std::vector<std::string>> completions;

  void script(std::string_view prompt, std::vector<std::string> answers) {
    completions[prompt_digest(prompt)] = std::move(answers);
  }

  void validate() const {
    if (dim == 0) fail(ErrorCode::kLoadError, "fixture dim must be positive");
    auto check = [&](const Embedding& e, const std::string& what) {
      if (e.dim() != dim) {
        fail(ErrorCode::kLoadError, "fixture " + what + " has dim " + std::to_string(e.dim()) +
                                        ", expected " + std::to_string(dim));
      }
    };
    for (const auto& [text, e] : texts) check(e, "text '" + text + "'");
    for (const auto& [uri, image] : images) {
      check(image.global_embedding, "image '" + uri + "'");
      for (const FixtureRegion& r : image.regions) {
        check(r.embedding, "region of '" + uri + "'");
        if (!(r.score >= 0.0 && r.score <= 1.0)) {
          fail(ErrorCode::kLoadError, "fixture region score outside [0,1] in '" + uri + "'");
        }
      }
    }
  }

  json to_json() const {
    json j;
    j["dim"] = dim;
    j["texts"] = json::object();
    for (const auto& [t, e] : texts) j["texts"][t] = embedding_to_json(e);
    j["images"] = json::object();
    for (const auto& [uri, image] : images) {
      json ji;
      ji["global_embedding"] = embedding_to_json(image.global_embedding);
      ji["regions"] = json::array();
      for (const FixtureRegion& r : image.regions) {
        ji["regions"].push_back({{"box", box_to_json(r.box)},
                                 {"embedding", embedding_to_json(r.embedding)},
                                 {"phrase", r.phrase},
                                 {"score", r.score}});
      }
      j["images"][uri] = std::move(ji);
    }
    j["completions"] = completions;
    return j;
  }

  static FixtureDocument from_json(const json& j) {
    FixtureDocument doc;
    try {
      if (j.contains("dim")) {
        doc.dim = j.at("dim").get<std::size_t>();
      } else if (j.contains("texts") && !j["texts"].empty()) {
        doc.dim = j["texts"].begin()->size();
      }
      if (j.contains("texts")) {
        for (const auto& [t, v] : j.at("texts").items()) doc.texts.emplace(t, embedding_from_json(v));
      }
      if (j.contains("images")) {
        for (const auto& [uri, ji] : j.at("images").items()) {
          FixtureImage image{embedding_from_json(ji.at("global_embedding")), {}};
          if (ji.contains("regions")) {
            for (const json& jr : ji.at("regions")) {
              image.regions.push_back(FixtureRegion{box_from_json(jr.at("box")),
                                                    embedding_from_json(jr.at("embedding")),
                                                    jr.at("phrase").get<std::string>(),
                                                    jr.at("score").get<double>()});
            }
          }
          doc.images.emplace(uri, std::move(image));
        }
      }
      if (j.contains("completions")) {
        doc.completions = j.at("completions").get<std::map<std::string, std::vector<std::string>>>();
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kLoadError, std::string("malformed fixture: ") + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::kLoadError, std::string("malformed fixture: ") + e.what());
    }
    doc.validate();
    return doc;
  }
};

// Unit vector derived from a SHA-256 seed via splitmix64. Unrelated strings get
// near-orthogonal vectors.
inline Embedding seeded_hash_embedding(std::string_view text, std::size_t dim) {
  const auto digest = sha256(text);
  std::uint64_t state = 0;
  for (int i = 0; i < 8; ++i) state = (state << 8) | digest[static_cast<std::size_t>(i)];
  auto next = [&state]() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::vector<double> v(dim);
  double norm2 = 0.0;
  while (norm2 == 0.0) {
    norm2 = 0.0;
    for (double& x : v) {
      // 53 random bits mapped onto [-1, 1).
      x = static_cast<double>(next() >> 11) * 0x1.0p-52 - 1.0;
      norm2 += x * x;
    }
  }
  return Embedding(std::move(v)).normalized();
}

struct FixtureCallCounts {
  std::uint64_t embed_text = 0;
  std::uint64_t embed_image = 0;
  std::uint64_t embed_region = 0;
  std::uint64_t ground = 0;
  std::uint64_t explain = 0;
};

class FixtureBackend final : public Backend {
 public:
  explicit FixtureBackend(FixtureDocument doc)
      : doc_(std::move(doc)),
        identity_("fixture:" + sha256_hex(doc_.to_json().dump()).substr(0, 16)) {
    doc_.validate();
  }

  static FixtureBackend from_file(const std::filesystem::path& path) {
    return FixtureBackend(FixtureDocument::from_json(read_json_file(path)));
  }

  std::string identity() const override { return identity_; }

  const FixtureDocument& document() const { return doc_; }

  FixtureCallCounts counts() const {
    return {embed_text_.load(), embed_image_.load(), embed_region_.load(), ground_.load(),
            explain_.load()};
  }

 protected:
  std::vector<Embedding> do_embed_text(const std::vector<std::string>& texts) const override {
    ++embed_text_;
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) {
      auto it = doc_.texts.find(t);
      out.push_back(it != doc_.texts.end() ? it->second : seeded_hash_embedding(t, doc_.dim));
    }
    return out;
  }

  Embedding do_embed_image(const ImageRef& image) const override {
    ++embed_image_;
    return find_image(image).global_embedding;
  }

  Embedding do_embed_region(const ImageRef& image, const BoundingBox& box) const override {
    ++embed_region_;
    const FixtureImage& fi = find_image(image);
    const FixtureRegion* best = nullptr;
    double best_iou = 0.0;
    for (const FixtureRegion& r : fi.regions) {
      const double v = iou(r.box, box);
      if (v > best_iou) {
        best_iou = v;
        best = &r;
      }
    }
    if (best == nullptr) {
      fail(ErrorCode::kInvalidArgument, "box does not overlap any region of '" + image.uri + "'");
    }
    return best->embedding;
  }

  std::vector<Detection> do_ground(const ImageRef& image, const std::string& caption) const override {
    ++ground_;
    std::vector<Detection> out;
    for (const FixtureRegion& r : find_image(image).regions) {
      if (contains_phrase(caption, r.phrase, /*case_insensitive=*/true)) {
        out.push_back(Detection{r.phrase, r.box, r.score});
      }
    }
    return out;
  }

  std::vector<std::string> do_explain(const std::string& prompt, int n) const override {
    ++explain_;
    const std::string digest = prompt_digest(prompt);
    auto it = doc_.completions.find(digest);
    if (it == doc_.completions.end()) {
      fail(ErrorCode::kFixtureMiss, "no scripted completion for digest " + digest +
                                        " (prompt: \"" + prompt.substr(0, 120) + "\")");
    }
    std::vector<std::string> out = it->second;
    if (out.size() > static_cast<std::size_t>(n)) out.resize(static_cast<std::size_t>(n));
    return out;
  }

 private:
  const FixtureImage& find_image(const ImageRef& image) const {
    auto it = doc_.images.find(image.uri);
    if (it == doc_.images.end()) {
      it = doc_.images.find(std::filesystem::path(image.uri).filename().string());
    }
    if (it == doc_.images.end()) fail(ErrorCode::kNotFound, "unknown fixture image '" + image.uri + "'");
    return it->second;
  }

  FixtureDocument doc_;
  std::string identity_;
  mutable std::atomic<std::uint64_t> embed_text_{0};
  mutable std::atomic<std::uint64_t> embed_image_{0};
  mutable std::atomic<std::uint64_t> embed_region_{0};
  mutable std::atomic<std::uint64_t> ground_{0};
  mutable std::atomic<std::uint64_t> explain_{0};
};

}  // namespace zsgsr
