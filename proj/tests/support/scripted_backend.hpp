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


#pragma once

#include <map>
#include <string>
#include <vector>

#include "zsgsr/backends.hpp"
#include "zsgsr/fixture_backend.hpp"

namespace zsgsr::testing {

// Hand-scripted responses for unit tests. Unscripted texts embed by hash;
// unscripted captions and images fail.
class ScriptedBackend final : public Backend {
 public:
  std::size_t dim = 4;
  std::map<std::string, Embedding> texts;
  std::map<std::string, Embedding> images;
  std::map<std::string, std::vector<Detection>> captions;  // keyed by caption
  std::map<std::string, Embedding> regions;               // keyed by box json
  mutable std::vector<std::string> ground_log;

  static std::string region_key(const BoundingBox& b) {
    return std::to_string(b.x1()) + "," + std::to_string(b.y1()) + "," + std::to_string(b.x2()) + "," +
           std::to_string(b.y2());
  }

  std::string identity() const override { return "scripted"; }

 protected:
  std::vector<Embedding> do_embed_text(const std::vector<std::string>& in) const override {
    std::vector<Embedding> out;
    for (const std::string& t : in) {
      auto it = texts.find(t);
      out.push_back(it != texts.end() ? it->second : seeded_hash_embedding(t, dim));
    }
    return out;
  }
  Embedding do_embed_image(const ImageRef& image) const override {
    auto it = images.find(image.uri);
    if (it == images.end()) fail(ErrorCode::kNotFound, "no image " + image.uri);
    return it->second;
  }
  Embedding do_embed_region(const ImageRef&, const BoundingBox& box) const override {
    auto it = regions.find(region_key(box));
    if (it == regions.end()) fail(ErrorCode::kNotFound, "no region " + region_key(box));
    return it->second;
  }
  std::vector<Detection> do_ground(const ImageRef&, const std::string& caption) const override {
    ground_log.push_back(caption);
    auto it = captions.find(caption);
    if (it == captions.end()) fail(ErrorCode::kTransport, "grounder down for: " + caption);
    return it->second;
  }
  std::vector<std::string> do_explain(const std::string& prompt, int) const override {
    fail(ErrorCode::kGenerationFailed, "no completions for: " + prompt);
  }
};

}  // namespace zsgsr::testing
