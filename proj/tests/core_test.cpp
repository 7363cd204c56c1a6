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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "zsgsr/core.hpp"

namespace zsgsr {
namespace {

const char* kBuys = "the AGENT buys GOODS with PAYMENT from the SELLER in a PLACE";

VerbClass buying() {
  return VerbClass("buying", "buying", kBuys,
                   {SemanticRole("AGENT"), SemanticRole("GOODS"), SemanticRole("PAYMENT"),
                    SemanticRole("SELLER"), SemanticRole("PLACE")});
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInternal;
}

TEST(SemanticRoleTest, AcceptsUppercaseAlphanumeric) {
  EXPECT_EQ(SemanticRole("AGENT").name(), "AGENT");
  EXPECT_EQ(SemanticRole("ROLE2").name(), "ROLE2");
  EXPECT_EQ(code_of([] { SemanticRole(""); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { SemanticRole("agent"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { SemanticRole("AG ENT"); }), ErrorCode::kInvalidArgument);
}

TEST(VerbClassTest, ValidatesRolesAgainstTemplate) {
  EXPECT_NO_THROW(buying());
  EXPECT_EQ(code_of([] { VerbClass("v", "v", "the AGENT runs", {}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] {
              VerbClass("v", "v", "the AGENT runs", {SemanticRole("AGENT"), SemanticRole("AGENT")});
            }),
            ErrorCode::kInvalidArgument);
  // Whole-token rule: AGENTS does not contain the role AGENT.
  EXPECT_EQ(code_of([] { VerbClass("v", "v", "the AGENTS run", {SemanticRole("AGENT")}); }),
            ErrorCode::kInvalidArgument);
  // Case-sensitive: a lowercase mention is not a role token.
  EXPECT_EQ(code_of([] { VerbClass("v", "v", "the agent runs", {SemanticRole("AGENT")}); }),
            ErrorCode::kInvalidArgument);
}

TEST(VerbClassTest, TemplateOrder) {
  VerbClass v("v", "v", "the TOOL is used by the AGENT at a PLACE",
              {SemanticRole("AGENT"), SemanticRole("PLACE"), SemanticRole("TOOL")});
  const auto order = v.roles_in_template_order();
  ASSERT_EQ(order.size(), 3u);
  EXPECT_EQ(order[0].name(), "TOOL");
  EXPECT_EQ(order[1].name(), "AGENT");
  EXPECT_EQ(order[2].name(), "PLACE");
  EXPECT_EQ(v.display_name(), "v");
}

TEST(NounClassTest, Validate) {
  EXPECT_NO_THROW((NounClass{"n1", "woman"}.validate()));
  EXPECT_EQ(code_of([] { NounClass{"", "woman"}.validate(); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { NounClass{"n1", "  "}.validate(); }), ErrorCode::kInvalidArgument);
}

TEST(EmbeddingTest, Invariants) {
  EXPECT_EQ(code_of([] { Embedding(std::vector<double>{}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { Embedding({1.0, NAN}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { Embedding({1.0, INFINITY}); }), ErrorCode::kInvalidArgument);
  Embedding e({3.0, 4.0});
  EXPECT_EQ(e.dim(), 2u);
  EXPECT_DOUBLE_EQ(e.norm(), 5.0);
  EXPECT_DOUBLE_EQ(e.normalized().values()[0], 0.6);
}

TEST(BoundingBoxTest, Invariants) {
  EXPECT_NO_THROW(BoundingBox(0, 0, 1, 1));
  EXPECT_EQ(code_of([] { BoundingBox(1, 0, 1, 1); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { BoundingBox(0, 2, 1, 1); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { BoundingBox(-1, 0, 1, 1); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { BoundingBox(0, 0, INFINITY, 1); }), ErrorCode::kInvalidArgument);
  EXPECT_DOUBLE_EQ(BoundingBox(1, 2, 4, 6).area(), 12.0);
}

TEST(CosineTest, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Embedding({1, 0, 0}), Embedding({1, 0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Embedding({1, 0}), Embedding({0, 1})), 0.0);
  EXPECT_NEAR(cosine_similarity(Embedding({1, 0}), Embedding({1, 1})), 0.7071, 1e-4);
  EXPECT_NEAR(cosine_similarity(Embedding({1, 0}), Embedding({1, 1})), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(cosine_similarity(Embedding({1, 0}), Embedding({-2, 0})), -1.0);
}

TEST(CosineTest, Errors) {
  EXPECT_EQ(code_of([] { cosine_similarity(Embedding({1, 0}), Embedding({1, 0, 0})); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { cosine_similarity(Embedding({0, 0}), Embedding({1, 0})); }),
            ErrorCode::kDegenerateInput);
}

TEST(CosineTest, SymmetricAndScaleInvariant) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(8), b(8);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    std::vector<double> a2 = a;
    for (auto& x : a2) x *= 2.0;
    const double ab = cosine_similarity(Embedding(a), Embedding(b));
    EXPECT_NEAR(ab, cosine_similarity(Embedding(b), Embedding(a)), 1e-12);
    EXPECT_NEAR(ab, cosine_similarity(Embedding(a2), Embedding(b)), 1e-12);
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(IouTest, Examples) {
  EXPECT_DOUBLE_EQ(iou(BoundingBox(0, 0, 2, 2), BoundingBox(0, 0, 2, 2)), 1.0);
  EXPECT_DOUBLE_EQ(iou(BoundingBox(0, 0, 1, 1), BoundingBox(5, 5, 6, 6)), 0.0);
  EXPECT_NEAR(iou(BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 3, 3)), 1.0 / 7.0, 1e-15);
  // Touching edges do not overlap.
  EXPECT_DOUBLE_EQ(iou(BoundingBox(0, 0, 1, 1), BoundingBox(1, 0, 2, 1)), 0.0);
}

TEST(IouTest, SymmetricAndMonotoneUnderTranslation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int t = 0; t < 300; ++t) {
    const double x = u(rng), y = u(rng), w = 1.0 + u(rng), h = 1.0 + u(rng);
    const BoundingBox a(x, y, x + w, y + h);
    const BoundingBox b(x + 1.0, y + 2.0, x + w + 3.0, y + h + 1.0);
    EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    // Sliding a copy of `a` to the right shrinks the intersection.
    double prev = 1.0;
    for (int k = 1; k < 5; ++k) {
      const double dx = w * k / 5.0;
      const double cur = iou(a, BoundingBox(x + dx, y, x + w + dx, y + h));
      EXPECT_LT(cur, prev);
      prev = cur;
    }
    EXPECT_DOUBLE_EQ(iou(a, BoundingBox(x + w + 1.0, y, x + 2.0 * w + 1.0, y + h)), 0.0);
  }
}

TEST(FillTemplateTest, Examples) {
  const VerbClass v = buying();
  EXPECT_EQ(fill_template(v, {{SemanticRole("AGENT"), "woman"}}),
            "the woman buys GOODS with PAYMENT from the SELLER in a PLACE");
  EXPECT_EQ(fill_template(v, {}), kBuys);
  const std::string all = fill_template(v, {{SemanticRole("AGENT"), "woman"},
                                            {SemanticRole("GOODS"), "book"},
                                            {SemanticRole("PAYMENT"), "cash"},
                                            {SemanticRole("SELLER"), "clerk"},
                                            {SemanticRole("PLACE"), "store"}});
  EXPECT_EQ(all, "the woman buys book with cash from the clerk in a store");
  for (const SemanticRole& r : v.roles()) EXPECT_FALSE(contains_token(all, r.name())) << r.name();
}

TEST(FillTemplateTest, Errors) {
  const VerbClass v = buying();
  EXPECT_EQ(code_of([&] { fill_template(v, {{SemanticRole("TOOL"), "pen"}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { fill_template(v, {{SemanticRole("AGENT"), " "}}); }), ErrorCode::kInvalidArgument);
}

TEST(FillTemplateTest, WholeTokenAndIdempotent) {
  EXPECT_EQ(fill_role_tokens("AGENTS and AGENT and XAGENT, AGENT.", {{SemanticRole("AGENT"), "cat"}}),
            "AGENTS and cat and XAGENT, cat.");
  const VerbClass v = buying();
  const RoleAssignment a{{SemanticRole("AGENT"), "woman"}, {SemanticRole("PLACE"), "store"}};
  const std::string once = fill_template(v, a);
  EXPECT_EQ(fill_role_tokens(once, a), once);
  // Non-role text is untouched: stripping the glosses from both sides leaves
  // the same skeleton.
  EXPECT_EQ(fill_role_tokens(once, {{SemanticRole("GOODS"), "GOODS"}}), once);
}

TEST(TokenTest, ContainsToken) {
  EXPECT_TRUE(contains_token("the AGENT buys", "AGENT"));
  EXPECT_FALSE(contains_token("the AGENTS buy", "AGENT"));
  EXPECT_FALSE(contains_token("the agent buys", "AGENT"));
  EXPECT_TRUE(contains_token("the agent buys", "AGENT", true));
  EXPECT_TRUE(contains_token("AGENT", "AGENT"));
  EXPECT_FALSE(contains_token("", "AGENT"));
}

TEST(TokenTest, ContainsPhrase) {
  EXPECT_TRUE(contains_phrase("the AGENT nearby cooks", "AGENT nearby"));
  EXPECT_TRUE(contains_phrase("the agent,  Nearby cooks", "AGENT nearby", true));
  EXPECT_FALSE(contains_phrase("the AGENT cooks nearby", "AGENT nearby"));
  EXPECT_FALSE(contains_phrase("the AGENTS nearby", "AGENT nearby"));
  EXPECT_TRUE(contains_phrase("the AGENT cooks", "AGENT"));
  EXPECT_FALSE(contains_phrase("AGENT", "AGENT nearby"));
  EXPECT_FALSE(contains_phrase("the AGENT", " , "));
}

TEST(FrameAnnotationTest, Validate) {
  const VerbClass v = buying();
  FrameAnnotation a{"img", "buying", {{}, {}, {}}, {}};
  EXPECT_NO_THROW(a.validate(v));
  a.annotator_frames.pop_back();
  EXPECT_EQ(code_of([&] { a.validate(v); }), ErrorCode::kDataError);
  a.annotator_frames = {{{SemanticRole("TOOL"), "n"}}, {}, {}};
  EXPECT_EQ(code_of([&] { a.validate(v); }), ErrorCode::kDataError);
}

TEST(ErrorTest, MessageCarriesCode) {
  try {
    fail(ErrorCode::kFixtureMiss, "digest abc");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFixtureMiss);
    EXPECT_EQ(std::string(e.what()), "fixture-miss: digest abc");
  }
}

}  // namespace
}  // namespace zsgsr
