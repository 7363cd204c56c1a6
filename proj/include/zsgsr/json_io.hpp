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

// JSON encodings of the core types, shared by the wire protocol, the fixture
// format, and the prediction files.

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "zsgsr/core.hpp"
#include "zsgsr/error.hpp"

namespace zsgsr {

using json = nlohmann::json;

inline json box_to_json(const BoundingBox& b) { return json::array({b.x1(), b.y1(), b.x2(), b.y2()}); }

inline BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    fail(ErrorCode::kInvalidArgument, "box must be an array [x1,y1,x2,y2]");
  }
  for (const json& v : j) {
    if (!v.is_number()) fail(ErrorCode::kInvalidArgument, "box coordinates must be numbers");
  }
  return BoundingBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                     j[3].get<double>());
}

inline json embedding_to_json(const Embedding& e) {
  return json(std::vector<double>(e.values().begin(), e.values().end()));
}

inline Embedding embedding_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorCode::kInvalidArgument, "embedding must be an array of numbers");
  std::vector<double> values;
  values.reserve(j.size());
  for (const json& v : j) {
    if (!v.is_number()) fail(ErrorCode::kInvalidArgument, "embedding entries must be numbers");
    values.push_back(v.get<double>());
  }
  return Embedding(std::move(values));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kLoadError, path.string() + ": " + e.what());
  }
}

// Writes to a sibling temporary and renames it over `path`, so readers never
// observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  static std::atomic<unsigned long> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::kIo, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

}  // namespace zsgsr
