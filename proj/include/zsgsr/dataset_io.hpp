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

// SWiG-style annotation and vocabulary ingestion, and the JSON-lines
// prediction format.
//
// Accepted vocabulary ("space") shape, extra fields ignored:
//
//   {"verbs": {"buying": {"template": "the AGENT buys GOODS ...",   // or "abstract"
//                         "roles": ["agent", "goods", ...]}},       // or "order", or a role object
//    "nouns": {"n10787470": "woman"}}                               // or {"gloss": "..."|[...]}
//
// Accepted annotation shape:
//
//   {"<image>": {"verb": "buying",
//                "frames": [{"agent": "n10787470", "place": ""}, x3],
//                "bb": {"agent": [x1, y1, x2, y2], "place": [-1, -1, -1, -1]}}}
//
// Role names are upper-cased on load. An all -1 box means "not visible".

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "zsgsr/core.hpp"
#include "zsgsr/json_io.hpp"
#include "zsgsr/log.hpp"

namespace zsgsr {

struct DatasetBundle {
  std::map<std::string, VerbClass> verbs;
  std::map<std::string, NounClass> nouns;
  std::vector<FrameAnnotation> annotations;  // ascending image id
  std::filesystem::path image_root;

  const VerbClass& verb(const std::string& id) const {
    auto it = verbs.find(id);
    if (it == verbs.end()) fail(ErrorCode::kDataError, "unknown verb '" + id + "'");
    return it->second;
  }

  std::string image_uri(const std::string& image_id) const {
    return image_root.empty() ? image_id : (image_root / image_id).string();
  }

  std::vector<VerbClass> verb_list() const {
    std::vector<VerbClass> out;
    for (const auto& [id, v] : verbs) out.push_back(v);
    return out;
  }

  std::vector<NounClass> noun_list() const {
    std::vector<NounClass> out;
    for (const auto& [id, n] : nouns) out.push_back(n);
    return out;
  }
};

namespace detail {

[[noreturn]] inline void load_error(const std::string& where, const std::string& what) {
  fail(ErrorCode::kLoadError, where + ": " + what);
}

inline SemanticRole role_from_data(const std::string& where, const std::string& raw) {
  try {
    return SemanticRole(to_upper(raw));
  } catch (const Error& e) {
    load_error(where, e.what());
  }
}

inline std::string gloss_of(const std::string& id, const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.contains("gloss")) {
    const json& g = j.at("gloss");
    if (g.is_string()) return g.get<std::string>();
    if (g.is_array() && !g.empty() && g.front().is_string()) return g.front().get<std::string>();
  }
  load_error("noun '" + id + "'", "expected a gloss string");
}

inline VerbClass verb_of(const std::string& id, const json& j) {
  const std::string where = "verb '" + id + "'";
  if (!j.is_object()) load_error(where, "expected an object");
  std::string tmpl;
  if (j.contains("template")) {
    tmpl = j.at("template").get<std::string>();
  } else if (j.contains("abstract")) {
    tmpl = j.at("abstract").get<std::string>();
  } else {
    load_error(where, "missing 'template'");
  }
  std::vector<SemanticRole> roles;
  const json* list = nullptr;
  if (j.contains("roles") && j.at("roles").is_array()) {
    list = &j.at("roles");
  } else if (j.contains("order") && j.at("order").is_array()) {
    list = &j.at("order");
  }
  if (list) {
    for (const json& r : *list) roles.push_back(role_from_data(where + ".roles", r.get<std::string>()));
  } else if (j.contains("roles") && j.at("roles").is_object()) {
    for (const auto& [r, unused] : j.at("roles").items()) roles.push_back(role_from_data(where + ".roles", r));
  } else {
    load_error(where, "missing 'roles'");
  }
  std::string name = j.value("name", j.value("display_name", id));
  try {
    return VerbClass(id, name, tmpl, std::move(roles));
  } catch (const Error& e) {
    load_error(where, e.what());
  }
}

inline std::optional<BoundingBox> gt_box_of(const std::string& where, const json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 4) load_error(where, "box must be [x1,y1,x2,y2]");
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) load_error(where, "box coordinates must be numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) load_error(where, "box coordinate is not finite");
  }
  if (v[0] == -1 && v[1] == -1 && v[2] == -1 && v[3] == -1) return std::nullopt;
  for (double c : v) {
    if (c < 0) load_error(where, "negative box coordinate");
  }
  if (!(v[0] < v[2] && v[1] < v[3])) {
    log::warning(where + ": dropping degenerate box");
    return std::nullopt;
  }
  return BoundingBox(v[0], v[1], v[2], v[3]);
}

}  // namespace detail

inline void load_space(const json& space, DatasetBundle& bundle) {
  if (!space.is_object() || !space.contains("verbs") || !space.contains("nouns")) {
    fail(ErrorCode::kLoadError, "space file needs 'verbs' and 'nouns'");
  }
  for (const auto& [id, jv] : space.at("verbs").items()) bundle.verbs.emplace(id, detail::verb_of(id, jv));
  for (const auto& [id, jn] : space.at("nouns").items()) {
    NounClass n{id, detail::gloss_of(id, jn)};
    try {
      n.validate();
    } catch (const Error& e) {
      detail::load_error("noun '" + id + "'", e.what());
    }
    bundle.nouns.emplace(id, std::move(n));
  }
}

inline FrameAnnotation parse_annotation(const std::string& image_id, const json& j,
                                        const DatasetBundle& bundle) {
  const std::string where = "image '" + image_id + "'";
  if (!j.is_object() || !j.contains("verb") || !j.at("verb").is_string()) {
    detail::load_error(where, "missing 'verb'");
  }
  FrameAnnotation ann;
  ann.image_id = image_id;
  ann.verb = j.at("verb").get<std::string>();
  auto vit = bundle.verbs.find(ann.verb);
  if (vit == bundle.verbs.end()) detail::load_error(where + ".verb", "unknown verb '" + ann.verb + "'");
  const VerbClass& verb = vit->second;

  if (!j.contains("frames") || !j.at("frames").is_array()) detail::load_error(where, "missing 'frames'");
  const json& frames = j.at("frames");
  if (frames.size() != kAnnotatorsPerImage) {
    detail::load_error(where + ".frames", "expected 3 annotator frames, got " + std::to_string(frames.size()));
  }
  for (std::size_t a = 0; a < frames.size(); ++a) {
    const std::string fwhere = where + ".frames[" + std::to_string(a) + "]";
    if (!frames[a].is_object()) detail::load_error(fwhere, "expected an object");
    std::map<SemanticRole, std::string> frame;
    for (const auto& [raw_role, jn] : frames[a].items()) {
      const SemanticRole role = detail::role_from_data(fwhere, raw_role);
      if (!verb.has_role(role)) detail::load_error(fwhere + "." + raw_role, "not a role of '" + verb.id() + "'");
      const std::string noun = jn.is_null() ? std::string() : jn.get<std::string>();
      if (!noun.empty() && !bundle.nouns.contains(noun)) {
        detail::load_error(fwhere + "." + raw_role, "unknown noun '" + noun + "'");
      }
      frame.emplace(role, noun);
    }
    ann.annotator_frames.push_back(std::move(frame));
  }
  if (j.contains("bb")) {
    if (!j.at("bb").is_object()) detail::load_error(where + ".bb", "expected an object");
    for (const auto& [raw_role, jb] : j.at("bb").items()) {
      const std::string bwhere = where + ".bb." + raw_role;
      const SemanticRole role = detail::role_from_data(bwhere, raw_role);
      if (!verb.has_role(role)) detail::load_error(bwhere, "not a role of '" + verb.id() + "'");
      if (auto box = detail::gt_box_of(bwhere, jb)) ann.gt_boxes.emplace(role, *box);
    }
  }
  return ann;
}

// Vocabulary only, for commands that do not need annotations.
inline DatasetBundle load_vocabulary(const std::filesystem::path& space_path) {
  DatasetBundle bundle;
  try {
    load_space(read_json_file(space_path), bundle);
  } catch (const json::exception& e) {
    fail(ErrorCode::kLoadError, e.what());
  }
  return bundle;
}

inline DatasetBundle load_dataset(const std::filesystem::path& annotation_path,
                                  const std::filesystem::path& space_path,
                                  const std::filesystem::path& image_root = {}) {
  DatasetBundle bundle;
  bundle.image_root = image_root;
  try {
    load_space(read_json_file(space_path), bundle);
    const json ann = read_json_file(annotation_path);
    if (!ann.is_object()) fail(ErrorCode::kLoadError, "annotation file must be an object keyed by image");
    for (const auto& [image_id, j] : ann.items()) {
      bundle.annotations.push_back(parse_annotation(image_id, j, bundle));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kLoadError, e.what());
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Predictions

enum class Setting { kTop1, kTop5, kGt };

inline constexpr Setting kAllSettings[] = {Setting::kTop1, Setting::kTop5, Setting::kGt};

inline const char* setting_name(Setting s) {
  switch (s) {
    case Setting::kTop1: return "top1";
    case Setting::kTop5: return "top5";
    case Setting::kGt: return "gt";
  }
  return "unknown";
}

inline Setting setting_from_name(std::string_view name) {
  for (Setting s : kAllSettings) {
    if (name == setting_name(s)) return s;
  }
  fail(ErrorCode::kInvalidArgument, "unknown setting '" + std::string(name) + "'");
}

struct PredictionRecord {
  std::string image_id;
  std::vector<std::string> top_verbs;
  // The top5 frame is the one for the annotated verb and is present only when
  // that verb is in the top five.
  std::map<Setting, PredictedFrame> frames;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

inline json frame_to_json(const PredictedFrame& f) {
  json roles = json::object();
  for (const auto& [role, fill] : f.role_fills) {
    json jf = {{"noun", fill.noun}, {"score", fill.score}};
    if (fill.box) jf["box"] = box_to_json(*fill.box);
    roles[role.name()] = std::move(jf);
  }
  return {{"verb", f.verb}, {"roles", std::move(roles)}};
}

inline PredictedFrame frame_from_json(const json& j) {
  PredictedFrame f{j.at("verb").get<std::string>(), {}};
  for (const auto& [role, jf] : j.at("roles").items()) {
    RoleFill fill{jf.at("noun").get<std::string>(), std::nullopt, jf.value("score", 0.0)};
    if (jf.contains("box")) fill.box = box_from_json(jf.at("box"));
    f.role_fills.emplace(SemanticRole(role), std::move(fill));
  }
  return f;
}

inline json record_to_json(const PredictionRecord& r) {
  json frames = json::object();
  for (const auto& [s, f] : r.frames) frames[setting_name(s)] = frame_to_json(f);
  return {{"image_id", r.image_id}, {"top_verbs", r.top_verbs}, {"frames", std::move(frames)}};
}

inline PredictionRecord record_from_json(const json& j) {
  PredictionRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.top_verbs = j.at("top_verbs").get<std::vector<std::string>>();
  for (const auto& [s, jf] : j.at("frames").items()) r.frames.emplace(setting_from_name(s), frame_from_json(jf));
  return r;
}

inline std::string predictions_to_jsonl(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const PredictionRecord& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline void export_predictions(const std::vector<PredictionRecord>& records,
                               const std::filesystem::path& path) {
  write_file_atomic(path, predictions_to_jsonl(records));
}

inline std::vector<PredictionRecord> parse_predictions(std::string_view text, const std::string& origin) {
  std::vector<PredictionRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      fail(ErrorCode::kLoadError, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path), path.string());
}

}  // namespace zsgsr
