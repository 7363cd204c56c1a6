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

// Frame evaluation under the Top-1-Verb, Top-5-Verb and Ground-Truth-Verb
// settings: verb, value, value-all, grounded-value and grounded-value-all.
//
// A role's noun is correct when it equals the noun of any annotator. A role is
// grounded when the noun is correct (joint mode) and either the ground truth
// has a box and the prediction overlaps it with IoU >= 0.5, or neither has a
// box. Under top1/top5 a wrong verb makes every other metric of the image
// wrong.

#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "zsgsr/core.hpp"
#include "zsgsr/dataset_io.hpp"
#include "zsgsr/json_io.hpp"

namespace zsgsr {

inline constexpr double kGroundingIou = 0.5;
inline constexpr std::size_t kTopFive = 5;

enum class GroundingMode { kJoint, kBoxOnly };
enum class AbsentBoxMode { kStrict, kIgnore };

struct EvalOptions {
  GroundingMode grounding = GroundingMode::kJoint;
  // kIgnore drops roles without a ground-truth box from the grounded metrics.
  AbsentBoxMode absent_box = AbsentBoxMode::kStrict;
};

struct SettingScore {
  bool verb_correct = false;
  std::size_t role_slots = 0;
  std::size_t value_correct = 0;
  bool value_all = false;
  std::size_t grnd_slots = 0;
  std::size_t grnd_correct = 0;
  bool grnd_all = false;

  friend bool operator==(const SettingScore&, const SettingScore&) = default;
};

using ImageScore = std::map<Setting, SettingScore>;

inline bool verb_in_top(const std::vector<std::string>& ranking, const std::string& verb, std::size_t k) {
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    if (ranking[i] == verb) return true;
  }
  return false;
}

inline ImageScore score_image(const PredictionRecord& record, const FrameAnnotation& annotation,
                              const VerbClass& verb, std::span<const Setting> settings,
                              const EvalOptions& options = {}) {
  if (record.image_id != annotation.image_id) {
    fail(ErrorCode::kDataError, "prediction for '" + record.image_id + "' scored against '" +
                                    annotation.image_id + "'");
  }
  if (verb.id() != annotation.verb) fail(ErrorCode::kDataError, annotation.image_id + ": verb mismatch");

  ImageScore out;
  for (Setting setting : settings) {
    SettingScore s;
    s.role_slots = verb.roles().size();
    for (const SemanticRole& r : verb.roles()) {
      if (options.absent_box == AbsentBoxMode::kStrict || annotation.gt_boxes.contains(r)) ++s.grnd_slots;
    }
    switch (setting) {
      case Setting::kTop1: s.verb_correct = verb_in_top(record.top_verbs, annotation.verb, 1); break;
      case Setting::kTop5: s.verb_correct = verb_in_top(record.top_verbs, annotation.verb, kTopFive); break;
      case Setting::kGt: s.verb_correct = true; break;
    }
    if (s.verb_correct) {
      auto fit = record.frames.find(setting);
      if (fit == record.frames.end()) {
        fail(ErrorCode::kDataError, annotation.image_id + ": no " + setting_name(setting) + " frame");
      }
      const PredictedFrame& frame = fit->second;
      if (frame.verb != annotation.verb) {
        fail(ErrorCode::kDataError, annotation.image_id + ": " + setting_name(setting) + " frame has verb '" +
                                        frame.verb + "', annotation has '" + annotation.verb + "'");
      }
      for (const SemanticRole& r : verb.roles()) {
        auto pit = frame.role_fills.find(r);
        if (pit == frame.role_fills.end()) continue;
        const RoleFill& fill = pit->second;
        bool noun_ok = false;
        for (const auto& annotator : annotation.annotator_frames) {
          auto ait = annotator.find(r);
          const std::string& gt_noun = ait == annotator.end() ? std::string() : ait->second;
          if (fill.noun == gt_noun) noun_ok = true;
        }
        if (noun_ok) ++s.value_correct;

        auto git = annotation.gt_boxes.find(r);
        const bool has_gt = git != annotation.gt_boxes.end();
        if (!has_gt && options.absent_box == AbsentBoxMode::kIgnore) continue;
        const bool box_ok = has_gt ? (fill.box && iou(*fill.box, git->second) >= kGroundingIou) : !fill.box;
        if (box_ok && (noun_ok || options.grounding == GroundingMode::kBoxOnly)) ++s.grnd_correct;
      }
      s.value_all = s.value_correct == s.role_slots;
      s.grnd_all = s.grnd_correct == s.grnd_slots;
    }
    out.emplace(setting, s);
  }
  return out;
}

// Score of an image that has no prediction at all: wrong under every setting,
// the ground-truth one included.
inline ImageScore missing_image_score(const FrameAnnotation& annotation, const VerbClass& verb,
                                      std::span<const Setting> settings, const EvalOptions& options = {}) {
  ImageScore out;
  for (Setting setting : settings) {
    SettingScore s;
    s.role_slots = verb.roles().size();
    for (const SemanticRole& r : verb.roles()) {
      if (options.absent_box == AbsentBoxMode::kStrict || annotation.gt_boxes.contains(r)) ++s.grnd_slots;
    }
    out.emplace(setting, s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

struct Ratio {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;

  double percent() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total); }

  // Two decimals, rounded half up, computed exactly from the counts.
  std::string formatted() const {
    if (total == 0) return "0.00";
    const std::uint64_t hundredths = (20000 * correct + total) / (2 * total);
    std::ostringstream os;
    os << hundredths / 100 << '.' << std::setw(2) << std::setfill('0') << hundredths % 100;
    return os.str();
  }

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct SettingMetrics {
  Ratio verb;
  Ratio value;
  Ratio val_all;
  Ratio grnd;
  Ratio grnd_all;

  friend bool operator==(const SettingMetrics&, const SettingMetrics&) = default;
};

struct MetricsReport {
  std::map<Setting, SettingMetrics> settings;
  std::uint64_t images = 0;
  std::uint64_t role_slots = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// value and grnd are means over images of the per-image fraction of correct
// role slots, kept exact as a rational with the lcm of the slot counts as the
// common denominator. Under AbsentBoxMode::kIgnore an image with no scorable
// grounding slot is left out of grnd and grnd-all.
inline MetricsReport aggregate(std::span<const ImageScore> scores) {
  if (scores.empty()) fail(ErrorCode::kInvalidArgument, "aggregate needs at least one image");
  std::uint64_t unit = 1;
  for (const ImageScore& image : scores) {
    for (const auto& [setting, s] : image) {
      if (s.role_slots == 0) fail(ErrorCode::kInvalidArgument, "image score without role slots");
      unit = std::lcm(unit, static_cast<std::uint64_t>(s.role_slots));
      if (s.grnd_slots > 0) unit = std::lcm(unit, static_cast<std::uint64_t>(s.grnd_slots));
    }
  }
  MetricsReport report;
  report.images = scores.size();
  for (const ImageScore& image : scores) {
    if (!image.empty()) report.role_slots += image.begin()->second.role_slots;
    for (const auto& [setting, s] : image) {
      SettingMetrics& m = report.settings[setting];
      m.verb.total += 1;
      m.verb.correct += s.verb_correct ? 1 : 0;
      m.value.total += unit;
      m.value.correct += s.value_correct * (unit / s.role_slots);
      m.val_all.total += 1;
      m.val_all.correct += s.value_all ? 1 : 0;
      if (s.grnd_slots == 0) continue;
      m.grnd.total += unit;
      m.grnd.correct += s.grnd_correct * (unit / s.grnd_slots);
      m.grnd_all.total += 1;
      m.grnd_all.correct += s.grnd_all ? 1 : 0;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

inline const char* setting_title(Setting s) {
  switch (s) {
    case Setting::kTop1: return "Top-1-Verb";
    case Setting::kTop5: return "Top-5-Verb";
    case Setting::kGt: return "Ground-Truth-Verb";
  }
  return "";
}

inline std::string render_report(const MetricsReport& report, std::string_view label = "zsgsr") {
  constexpr int kLabelWidth = 12;
  constexpr int kCell = 9;
  auto pad_right = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto pad_left = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  auto center = [](const std::string& s, std::size_t w) {
    if (s.size() >= w) return s;
    const std::size_t left = (w - s.size()) / 2;
    return std::string(left, ' ') + s + std::string(w - s.size() - left, ' ');
  };

  std::string titles = pad_right("", kLabelWidth);
  std::string heads = pad_right("Method", kLabelWidth);
  std::string rule(kLabelWidth, '-');
  std::string row = pad_right(std::string(label), kLabelWidth);
  for (const auto& [setting, m] : report.settings) {
    std::vector<std::pair<const char*, const Ratio*>> cols;
    if (setting != Setting::kGt) cols.emplace_back("verb", &m.verb);
    cols.emplace_back("value", &m.value);
    cols.emplace_back("val-all", &m.val_all);
    cols.emplace_back("grnd", &m.grnd);
    cols.emplace_back("grnd-all", &m.grnd_all);
    const std::size_t width = cols.size() * kCell + 1;
    titles += "|" + center(setting_title(setting), width);
    heads += "|";
    row += "|";
    rule += "+" + std::string(width, '-');
    for (const auto& [name, ratio] : cols) {
      heads += pad_left(name, kCell);
      row += pad_left(ratio->formatted(), kCell);
    }
    heads += " ";
    row += " ";
  }
  auto rstrip = [](std::string s) {
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
  };
  std::ostringstream os;
  os << rstrip(titles) << "\n"
     << rstrip(heads) << "\n"
     << rule << "\n"
     << rstrip(row) << "\n"
     << "images: " << report.images << "  role slots: " << report.role_slots << "\n";
  return os.str();
}

inline json report_to_json(const MetricsReport& report, std::string_view label = "zsgsr") {
  json settings = json::object();
  for (const auto& [setting, m] : report.settings) {
    json js = json::object();
    auto put = [&](const char* name, const Ratio& r) {
      js[name] = {{"percent", r.percent()}, {"rounded", r.formatted()}};
    };
    if (setting != Setting::kGt) put("verb", m.verb);
    put("value", m.value);
    put("val-all", m.val_all);
    put("grnd", m.grnd);
    put("grnd-all", m.grnd_all);
    settings[setting_name(setting)] = std::move(js);
  }
  return {{"label", label},
          {"images", report.images},
          {"role_slots", report.role_slots},
          {"settings", std::move(settings)}};
}

}  // namespace zsgsr
