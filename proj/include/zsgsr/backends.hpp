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

// The only boundary through which model inference happens. Engines talk to a
// `Backend`; concrete backends are the deterministic fixture and the HTTP
// client for the JSON wire protocol.

#pragma once

#include <cstddef>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zsgsr/core.hpp"
#include "zsgsr/error.hpp"
#include "zsgsr/sha256.hpp"

namespace zsgsr {

struct ImageRef {
  std::string uri;

  explicit ImageRef(std::string u) : uri(std::move(u)) {
    if (uri.empty()) fail(ErrorCode::kInvalidArgument, "image uri is empty");
  }
};

struct Detection {
  std::string phrase;
  BoundingBox box;
  double score;

  void validate() const {
    if (!(score >= 0.0 && score <= 1.0)) {
      fail(ErrorCode::kProtocol, "detection score outside [0,1]");
    }
  }
};

// Key under which fixture completions are scripted.
inline std::string prompt_digest(std::string_view prompt) { return sha256_hex(prompt); }

// Public entry points check pre- and postconditions shared by every
// implementation, then dispatch to the protected hooks. Implementations must be
// safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;

  std::vector<Embedding> embed_text(const std::vector<std::string>& texts) const {
    if (texts.empty()) fail(ErrorCode::kInvalidArgument, "embed_text needs at least one text");
    for (const std::string& t : texts) {
      if (t.empty()) fail(ErrorCode::kInvalidArgument, "embed_text got an empty string");
    }
    std::vector<Embedding> out = do_embed_text(texts);
    if (out.size() != texts.size()) {
      fail(ErrorCode::kProtocol, "backend returned " + std::to_string(out.size()) +
                                     " embeddings for " + std::to_string(texts.size()) + " texts");
    }
    for (const Embedding& e : out) {
      if (e.dim() != out.front().dim()) fail(ErrorCode::kProtocol, "embeddings differ in dim");
    }
    return out;
  }

  Embedding embed_text(const std::string& text) const {
    return std::move(embed_text(std::vector<std::string>{text}).front());
  }

  Embedding embed_image(const ImageRef& image) const { return do_embed_image(image); }

  Embedding embed_region(const ImageRef& image, const BoundingBox& box) const {
    return do_embed_region(image, box);
  }

  std::vector<Detection> ground(const ImageRef& image, const std::string& caption) const {
    if (caption.empty()) fail(ErrorCode::kInvalidArgument, "ground needs a caption");
    std::vector<Detection> out = do_ground(image, caption);
    for (const Detection& d : out) d.validate();
    return out;
  }

  std::vector<std::string> explain(const std::string& prompt, int n) const {
    if (prompt.empty()) fail(ErrorCode::kInvalidArgument, "explain needs a prompt");
    if (n < 1) fail(ErrorCode::kInvalidArgument, "explain needs n >= 1");
    std::vector<std::string> out = do_explain(prompt, n);
    if (out.size() > static_cast<std::size_t>(n)) out.resize(static_cast<std::size_t>(n));
    return out;
  }

  // Stable identity, part of every cache key.
  virtual std::string identity() const = 0;

 protected:
  virtual std::vector<Embedding> do_embed_text(const std::vector<std::string>& texts) const = 0;
  virtual Embedding do_embed_image(const ImageRef& image) const = 0;
  virtual Embedding do_embed_region(const ImageRef& image, const BoundingBox& box) const = 0;
  virtual std::vector<Detection> do_ground(const ImageRef& image,
                                           const std::string& caption) const = 0;
  virtual std::vector<std::string> do_explain(const std::string& prompt, int n) const = 0;
};

// Memoizes text embeddings. Misses in one request are sent as a single batch.
class TextEmbeddingCache {
 public:
  explicit TextEmbeddingCache(const Backend& backend) : backend_(backend) {}

  std::vector<Embedding> embed(const std::vector<std::string>& texts) {
    std::vector<std::string> missing;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (const std::string& t : texts) {
        if (!memo_.contains(t) &&
            std::find(missing.begin(), missing.end(), t) == missing.end()) {
          missing.push_back(t);
        }
      }
    }
    if (!missing.empty()) {
      std::vector<Embedding> fresh = backend_.embed_text(missing);
      std::lock_guard<std::mutex> lock(mu_);
      for (std::size_t i = 0; i < missing.size(); ++i) memo_.try_emplace(missing[i], fresh[i]);
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    std::lock_guard<std::mutex> lock(mu_);
    for (const std::string& t : texts) out.push_back(memo_.at(t));
    return out;
  }

  Embedding embed(const std::string& text) { return embed(std::vector<std::string>{text}).front(); }

  const Backend& backend() const { return backend_; }

 private:
  const Backend& backend_;
  std::mutex mu_;
  std::unordered_map<std::string, Embedding> memo_;
};

}  // namespace zsgsr
