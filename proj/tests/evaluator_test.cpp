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


#include <random>

#include <gtest/gtest.h>

#include "zsgsr/evaluator.hpp"

namespace zsgsr {
namespace {

const SemanticRole kAgent("AGENT");
const SemanticRole kTool("TOOL");
const SemanticRole kPlace("PLACE");

const VerbClass& mowing() {
  static const VerbClass v("mowing", "mowing", "the AGENT mows with the TOOL in the PLACE", {kAgent, kTool, kPlace});
  return v;
}

FrameAnnotation annotation() {
  FrameAnnotation a;
  a.image_id = "mowing_1.jpg";
  a.verb = "mowing";
  a.annotator_frames = {{{kAgent, "n.man"}, {kTool, "n.mower"}, {kPlace, "n.lawn"}},
                        {{kAgent, "n.person"}, {kTool, "n.mower"}, {kPlace, "n.garden"}},
                        {{kAgent, "n.man"}, {kTool, "n.mower"}, {kPlace, ""}}};
  a.gt_boxes = {{kAgent, BoundingBox(0, 0, 10, 10)}, {kTool, BoundingBox(20, 20, 30, 30)}};
  return a;
}

PredictedFrame frame(std::string agent, std::optional<BoundingBox> agent_box, std::string tool,
                     std::optional<BoundingBox> tool_box, std::string place, std::optional<BoundingBox> place_box) {
  return PredictedFrame{"mowing",
                        {{kAgent, {std::move(agent), agent_box, 0.0}},
                         {kTool, {std::move(tool), tool_box, 0.0}},
                         {kPlace, {std::move(place), place_box, 0.0}}}};
}

PredictionRecord record(std::vector<std::string> verbs, const PredictedFrame& f) {
  PredictionRecord r{"mowing_1.jpg", std::move(verbs), {}};
  r.frames.emplace(Setting::kGt, f);
  if (verb_in_top(r.top_verbs, "mowing", kTopFive)) r.frames.emplace(Setting::kTop5, f);
  if (!r.top_verbs.empty() && r.top_verbs.front() == "mowing") r.frames.emplace(Setting::kTop1, f);
  return r;
}

const PredictedFrame kPerfect =
    frame("n.man", BoundingBox(0, 0, 10, 10), "n.mower", BoundingBox(20, 20, 30, 30), "n.lawn", std::nullopt);

SettingScore all_true() { return SettingScore{true, 3, 3, true, 3, 3, true}; }

TEST(ScoreImageTest, PerfectMatch) {
  const auto s = score_image(record({"mowing", "a", "b", "c", "d"}, kPerfect), annotation(), mowing(), kAllSettings);
  for (Setting setting : kAllSettings) EXPECT_EQ(s.at(setting), all_true()) << setting_name(setting);
}

TEST(ScoreImageTest, IouBelowThreshold) {
  // (0,0,4,10) against (0,0,10,10): 40 / 100 = 0.4.
  ASSERT_DOUBLE_EQ(iou(BoundingBox(0, 0, 4, 10), BoundingBox(0, 0, 10, 10)), 0.4);
  ASSERT_DOUBLE_EQ(iou(BoundingBox(20, 20, 24, 30), BoundingBox(20, 20, 30, 30)), 0.4);
  const auto f = frame("n.man", BoundingBox(0, 0, 4, 10), "n.mower", BoundingBox(20, 20, 24, 30), "n.lawn", std::nullopt);
  const SettingScore s = score_image(record({"mowing"}, f), annotation(), mowing(), kAllSettings).at(Setting::kGt);
  EXPECT_EQ(s.value_correct, 3u);
  EXPECT_TRUE(s.value_all);
  EXPECT_EQ(s.grnd_correct, 1u);  // only the box-less PLACE
  EXPECT_FALSE(s.grnd_all);
  // Exactly 0.5 counts.
  const auto half = frame("n.man", BoundingBox(0, 0, 5, 10), "n.mower", BoundingBox(20, 20, 30, 30), "n.lawn", std::nullopt);
  EXPECT_EQ(score_image(record({"mowing"}, half), annotation(), mowing(), kAllSettings).at(Setting::kGt).grnd_correct,
            3u);
}

TEST(ScoreImageTest, WrongTopOneVerbZeroesEverything) {
  const auto s = score_image(record({"cooking", "mowing"}, kPerfect), annotation(), mowing(), kAllSettings);
  EXPECT_EQ(s.at(Setting::kTop1), (SettingScore{false, 3, 0, false, 3, 0, false}));
  EXPECT_EQ(s.at(Setting::kTop5), all_true());
  EXPECT_EQ(s.at(Setting::kGt), all_true());
  const auto miss = score_image(record({"a", "b", "c", "d", "e", "mowing"}, kPerfect), annotation(), mowing(),
                                kAllSettings);
  EXPECT_FALSE(miss.at(Setting::kTop5).verb_correct);
  EXPECT_EQ(miss.at(Setting::kTop5).value_correct, 0u);
}

TEST(ScoreImageTest, AnyAnnotatorCounts) {
  const auto f = frame("n.person", BoundingBox(0, 0, 10, 10), "n.mower", BoundingBox(20, 20, 30, 30), "n.garden",
                       std::nullopt);
  EXPECT_EQ(score_image(record({"mowing"}, f), annotation(), mowing(), kAllSettings).at(Setting::kGt), all_true());
  // The empty noun agrees with the third annotator's PLACE.
  const auto empty = frame("n.man", BoundingBox(0, 0, 10, 10), "n.mower", BoundingBox(20, 20, 30, 30), "", std::nullopt);
  EXPECT_EQ(score_image(record({"mowing"}, empty), annotation(), mowing(), kAllSettings).at(Setting::kGt), all_true());
  const auto wrong = frame("n.dog", BoundingBox(0, 0, 10, 10), "n.mower", BoundingBox(20, 20, 30, 30), "n.lawn",
                           std::nullopt);
  const SettingScore s = score_image(record({"mowing"}, wrong), annotation(), mowing(), kAllSettings).at(Setting::kGt);
  EXPECT_EQ(s.value_correct, 2u);
  EXPECT_EQ(s.grnd_correct, 2u);  // joint mode: the right box with a wrong noun scores nothing
}

TEST(ScoreImageTest, AbsentGroundTruthBox) {
  const auto boxed = frame("n.man", BoundingBox(0, 0, 10, 10), "n.mower", BoundingBox(20, 20, 30, 30), "n.lawn",
                           BoundingBox(0, 0, 50, 50));
  const SettingScore strict =
      score_image(record({"mowing"}, boxed), annotation(), mowing(), kAllSettings).at(Setting::kGt);
  EXPECT_EQ(strict.grnd_slots, 3u);
  EXPECT_EQ(strict.grnd_correct, 2u);
  EXPECT_TRUE(strict.value_all);
  EXPECT_FALSE(strict.grnd_all);

  const SettingScore ignore = score_image(record({"mowing"}, boxed), annotation(), mowing(), kAllSettings,
                                          {GroundingMode::kJoint, AbsentBoxMode::kIgnore})
                                  .at(Setting::kGt);
  EXPECT_EQ(ignore.grnd_slots, 2u);
  EXPECT_EQ(ignore.grnd_correct, 2u);
  EXPECT_TRUE(ignore.grnd_all);
}

TEST(ScoreImageTest, BoxOnlyMode) {
  const auto f = frame("n.dog", BoundingBox(0, 0, 10, 10), "n.pen", BoundingBox(0, 0, 1, 1), "n.lawn", std::nullopt);
  const SettingScore s = score_image(record({"mowing"}, f), annotation(), mowing(), kAllSettings,
                                     {GroundingMode::kBoxOnly, AbsentBoxMode::kStrict})
                             .at(Setting::kGt);
  EXPECT_EQ(s.value_correct, 1u);
  EXPECT_EQ(s.grnd_correct, 2u);
}

TEST(ScoreImageTest, MissingRolePredictionIsWrong) {
  PredictedFrame f = kPerfect;
  f.role_fills.erase(kTool);
  const SettingScore s = score_image(record({"mowing"}, f), annotation(), mowing(), kAllSettings).at(Setting::kGt);
  EXPECT_EQ(s.value_correct, 2u);
  EXPECT_EQ(s.grnd_correct, 2u);
}

TEST(ScoreImageTest, DataErrors) {
  PredictionRecord r = record({"mowing"}, kPerfect);
  r.image_id = "other.jpg";
  EXPECT_THROW(score_image(r, annotation(), mowing(), kAllSettings), Error);
  r = record({"mowing"}, kPerfect);
  r.frames.erase(Setting::kTop1);
  EXPECT_THROW(score_image(r, annotation(), mowing(), kAllSettings), Error);
  r = record({"mowing"}, kPerfect);
  r.frames.at(Setting::kGt).verb = "cooking";
  EXPECT_THROW(score_image(r, annotation(), mowing(), kAllSettings), Error);
  const VerbClass other("cooking", "cooking", "the AGENT cooks", {kAgent});
  EXPECT_THROW(score_image(record({"mowing"}, kPerfect), annotation(), other, kAllSettings), Error);
}

ImageScore gt_only(SettingScore s) { return {{Setting::kGt, s}}; }

TEST(AggregateTest, Examples) {
  const std::vector<ImageScore> one = {{{Setting::kTop1, all_true()}, {Setting::kGt, all_true()}}};
  const MetricsReport r = aggregate(one);
  EXPECT_EQ(r.images, 1u);
  EXPECT_EQ(r.role_slots, 3u);
  for (const auto& [s, m] : r.settings) {
    for (const Ratio* x : {&m.verb, &m.value, &m.val_all, &m.grnd, &m.grnd_all}) EXPECT_EQ(x->formatted(), "100.00");
  }

  // One of two images verb-correct, the correct one perfect.
  const std::vector<ImageScore> two = {{{Setting::kTop1, all_true()}},
                                       {{Setting::kTop1, SettingScore{false, 3, 0, false, 3, 0, false}}}};
  const SettingMetrics m = aggregate(two).settings.at(Setting::kTop1);
  EXPECT_EQ(m.verb.formatted(), "50.00");
  EXPECT_EQ(m.val_all.formatted(), "50.00");
  EXPECT_EQ(m.value.formatted(), "50.00");

  EXPECT_THROW(aggregate(std::vector<ImageScore>{}), Error);
}

TEST(AggregateTest, PerImageMeanOverUnequalRoleCounts) {
  // 1/1 and 0/3: the image mean is 50, a slot mean would be 25.
  const std::vector<ImageScore> scores = {gt_only({true, 1, 1, true, 1, 1, true}),
                                          gt_only({true, 3, 0, false, 3, 0, false})};
  const SettingMetrics m = aggregate(scores).settings.at(Setting::kGt);
  EXPECT_EQ(m.value.formatted(), "50.00");
  EXPECT_EQ(m.val_all.formatted(), "50.00");
  EXPECT_EQ(m.grnd.formatted(), "50.00");
  EXPECT_EQ(m.value, (Ratio{3, 6}));

  // 2/3 and 1/2 over lcm 6: (4 + 3) / 12.
  const std::vector<ImageScore> mixed = {gt_only({true, 3, 2, false, 3, 2, false}),
                                         gt_only({true, 2, 1, false, 2, 1, false})};
  EXPECT_EQ(aggregate(mixed).settings.at(Setting::kGt).value, (Ratio{7, 12}));
  EXPECT_EQ(aggregate(mixed).settings.at(Setting::kGt).value.formatted(), "58.33");
}

TEST(AggregateTest, IgnoreModeSkipsImagesWithoutScorableBoxes) {
  const std::vector<ImageScore> scores = {gt_only({true, 2, 2, true, 0, 0, true}),
                                          gt_only({true, 2, 1, false, 2, 1, false})};
  const SettingMetrics m = aggregate(scores).settings.at(Setting::kGt);
  EXPECT_EQ(m.grnd, (Ratio{1, 2}));
  EXPECT_EQ(m.grnd_all, (Ratio{0, 1}));
  EXPECT_EQ(m.val_all, (Ratio{1, 2}));
}

TEST(RatioTest, HalfUpRounding) {
  EXPECT_EQ((Ratio{1, 3}).formatted(), "33.33");
  EXPECT_EQ((Ratio{2, 3}).formatted(), "66.67");
  EXPECT_EQ((Ratio{1, 800}).formatted(), "0.13");   // 0.125
  EXPECT_EQ((Ratio{1, 1600}).formatted(), "0.06");  // 0.0625
  EXPECT_EQ((Ratio{5, 8}).formatted(), "62.50");
  EXPECT_EQ((Ratio{0, 7}).formatted(), "0.00");
  EXPECT_EQ((Ratio{7, 7}).formatted(), "100.00");
  EXPECT_EQ((Ratio{0, 0}).formatted(), "0.00");
  EXPECT_DOUBLE_EQ((Ratio{1, 4}).percent(), 25.0);
}

TEST(RenderTest, Layout) {
  MetricsReport r;
  r.images = 2;
  r.role_slots = 4;
  r.settings[Setting::kTop1] = {{1, 2}, {1, 3}, {0, 2}, {0, 2}, {0, 2}};
  r.settings[Setting::kGt] = {{2, 2}, {2, 3}, {1, 2}, {1, 2}, {1, 2}};
  const std::string expected =
      "            |                  Top-1-Verb                  |          Ground-Truth-Verb\n"
      "Method      |     verb    value  val-all     grnd grnd-all |    value  val-all     grnd grnd-all\n"
      "------------+----------------------------------------------+-------------------------------------\n"
      "zsgsr       |    50.00    33.33     0.00     0.00     0.00 |    66.67    50.00    50.00    50.00\n"
      "images: 2  role slots: 4\n";
  EXPECT_EQ(render_report(r), expected);

  const json j = report_to_json(r);
  EXPECT_FALSE(j["settings"]["gt"].contains("verb"));
  EXPECT_EQ(j["settings"]["top1"]["value"]["rounded"], "33.33");
  EXPECT_EQ(j["images"], 2);
}

// Light version of the ordering checks; the acceptance suite runs the full
// randomized comparison against a brute-force scorer.
TEST(AggregateTest, OrderingInequalities) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 300; ++t) {
    std::vector<ImageScore> scores;
    const int n = 1 + t % 5;
    for (int i = 0; i < n; ++i) {
      const std::size_t slots = 1 + rng() % 3;
      SettingScore top5;
      top5.verb_correct = rng() % 4 != 0;
      top5.role_slots = top5.grnd_slots = slots;
      if (top5.verb_correct) {
        top5.value_correct = rng() % (slots + 1);
        top5.grnd_correct = rng() % (top5.value_correct + 1);
      }
      top5.value_all = top5.verb_correct && top5.value_correct == slots;
      top5.grnd_all = top5.verb_correct && top5.grnd_correct == slots;
      SettingScore top1 = top5;
      if (rng() % 3 == 0) top1 = SettingScore{false, slots, 0, false, slots, 0, false};
      scores.push_back({{Setting::kTop1, top1}, {Setting::kTop5, top5}});
    }
    const MetricsReport r = aggregate(scores);
    auto le = [](const Ratio& a, const Ratio& b) { return a.correct * b.total <= b.correct * a.total; };
    for (const auto& [s, m] : r.settings) {
      EXPECT_TRUE(le(m.val_all, m.value));
      EXPECT_TRUE(le(m.grnd_all, m.grnd));
      EXPECT_TRUE(le(m.grnd, m.value));
    }
    EXPECT_TRUE(le(r.settings.at(Setting::kTop1).verb, r.settings.at(Setting::kTop5).verb));
  }
}

}  // namespace
}  // namespace zsgsr
