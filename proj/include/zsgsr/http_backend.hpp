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

// Client for the JSON wire protocol:
//
//   POST /v1/embed_text    {"texts": [...]}                      -> {"dim", "embeddings"}
//   POST /v1/embed_image   {"image_uri"}                         -> {"dim", "embedding"}
//   POST /v1/embed_region  {"image_uri", "box": [x1,y1,x2,y2]}   -> {"dim", "embedding"}
//   POST /v1/ground        {"image_uri", "caption"}              -> {"detections": [...]}
//   POST /v1/explain       {"prompt", "n"}                       -> {"completions": [...]}
//
// 4xx responses map to invalid-argument (404 to not-found) and are never
// retried. Connection failures and 5xx are retried with exponential backoff.

#pragma once

#include <algorithm>
#include <chrono>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "zsgsr/backends.hpp"
#include "zsgsr/json_io.hpp"

namespace zsgsr {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  // Upper bound on time spent across all attempts of one request.
  std::chrono::milliseconds total_cap{30000};
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(std::string endpoint, RetryPolicy policy = {})
      : endpoint_(std::move(endpoint)), policy_(policy) {
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
    if (endpoint_.empty()) fail(ErrorCode::kInvalidArgument, "http backend needs an endpoint");
    if (policy_.max_attempts < 1) fail(ErrorCode::kInvalidArgument, "retry policy needs >= 1 attempt");
  }

  std::string identity() const override { return "http:" + endpoint_; }

 protected:
  std::vector<Embedding> do_embed_text(const std::vector<std::string>& texts) const override {
    const json res = post("/v1/embed_text", {{"texts", texts}});
    const std::size_t dim = read_dim(res);
    std::vector<Embedding> out;
    for (const json& e : field(res, "embeddings", json::value_t::array)) {
      out.push_back(checked_embedding(e, dim));
    }
    return out;
  }

  Embedding do_embed_image(const ImageRef& image) const override {
    const json res = post("/v1/embed_image", {{"image_uri", image.uri}});
    return checked_embedding(field(res, "embedding", json::value_t::array), read_dim(res));
  }

  Embedding do_embed_region(const ImageRef& image, const BoundingBox& box) const override {
    const json res = post("/v1/embed_region", {{"image_uri", image.uri}, {"box", box_to_json(box)}});
    return checked_embedding(field(res, "embedding", json::value_t::array), read_dim(res));
  }

  std::vector<Detection> do_ground(const ImageRef& image, const std::string& caption) const override {
    const json res = post("/v1/ground", {{"image_uri", image.uri}, {"caption", caption}});
    std::vector<Detection> out;
    try {
      for (const json& d : field(res, "detections", json::value_t::array)) {
        out.push_back(Detection{d.at("phrase").get<std::string>(), box_from_json(d.at("box")),
                                d.at("score").get<double>()});
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kProtocol, std::string("malformed detection: ") + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kProtocol) throw;
      fail(ErrorCode::kProtocol, std::string("malformed detection: ") + e.what());
    }
    return out;
  }

  std::vector<std::string> do_explain(const std::string& prompt, int n) const override {
    const json res = post("/v1/explain", {{"prompt", prompt}, {"n", n}});
    std::vector<std::string> out;
    for (const json& c : field(res, "completions", json::value_t::array)) {
      if (!c.is_string()) fail(ErrorCode::kProtocol, "completion is not a string");
      out.push_back(c.get<std::string>());
    }
    return out;
  }

 private:
  static const json& field(const json& res, const char* key, json::value_t type) {
    if (!res.is_object() || !res.contains(key) || res.at(key).type() != type) {
      fail(ErrorCode::kProtocol, std::string("response lacks field '") + key + "'");
    }
    return res.at(key);
  }

  static std::size_t read_dim(const json& res) {
    if (!res.contains("dim") || !res.at("dim").is_number_unsigned() || res.at("dim").get<std::size_t>() == 0) {
      fail(ErrorCode::kProtocol, "response lacks a positive 'dim'");
    }
    return res.at("dim").get<std::size_t>();
  }

  static Embedding checked_embedding(const json& j, std::size_t dim) {
    try {
      Embedding e = embedding_from_json(j);
      if (e.dim() != dim) fail(ErrorCode::kProtocol, "embedding length differs from 'dim'");
      return e;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kProtocol) throw;
      fail(ErrorCode::kProtocol, e.what());
    }
  }

  static std::string error_body(const std::string& body) {
    try {
      const json j = json::parse(body);
      if (j.is_object() && j.contains("error") && j["error"].is_string()) return j["error"].get<std::string>();
    } catch (const json::exception&) {
    }
    return body.substr(0, 200);
  }

  json post(const std::string& path, const json& body) const {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const std::string payload = body.dump();
    auto backoff = policy_.initial_backoff;
    int last_status = 0;
    std::string last_error;
    int attempt = 0;
    while (attempt < policy_.max_attempts) {
      ++attempt;
      httplib::Client client(endpoint_);
      const auto remaining = policy_.total_cap -
                             std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
      const auto timeout = std::max(remaining, std::chrono::milliseconds(1));
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      auto res = client.Post(path, payload, "application/json");
      if (res) {
        last_status = res->status;
        if (res->status >= 200 && res->status < 300) {
          try {
            return json::parse(res->body);
          } catch (const json::parse_error& e) {
            fail(ErrorCode::kProtocol, path + ": response is not JSON: " + e.what());
          }
        }
        if (res->status == 404) fail(ErrorCode::kNotFound, path + ": " + error_body(res->body));
        if (res->status >= 400 && res->status < 500) {
          fail(ErrorCode::kInvalidArgument, path + ": " + error_body(res->body));
        }
        last_error = "HTTP " + std::to_string(res->status) + ": " + error_body(res->body);
      } else {
        last_status = 0;
        last_error = httplib::to_string(res.error());
      }
      if (attempt >= policy_.max_attempts) break;
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
      if (elapsed + backoff >= policy_.total_cap) break;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    throw TransportError(endpoint_ + path + " failed after " + std::to_string(attempt) +
                             " attempt(s): " + last_error,
                         attempt, last_status);
  }

  std::string endpoint_;
  RetryPolicy policy_;
};

}  // namespace zsgsr
