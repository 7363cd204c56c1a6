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

// Command line front end.
//
//   zsgsr precompute --space space.json --fixture fixture.json --cache-dir cache
//   zsgsr run --annotations test.json --space space.json --output preds.jsonl ...
//   zsgsr eval --predictions preds.jsonl --annotations test.json --space space.json

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zsgsr/zsgsr.hpp"

namespace {

struct Overrides {
  std::string config_file;
  std::string backend;
  std::string endpoint;
  std::string fixture;
  std::string cache_dir;
  std::string weights;
  std::vector<std::string> settings;
  double lambda = -1.0;
  int jobs = 0;
  double min_confidence = -1.0;
  bool no_verb_explainer = false;
  bool no_weighting = false;
  bool no_grounding_explainer = false;
  bool no_filter = false;
  bool no_noun_explainer = false;
  bool no_refine = false;
  bool grnd_joint = false;
  bool grnd_box_only = false;
  std::string absent_box;
  bool quiet = false;
};

void add_common_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_file, "JSON config document");
  cmd->add_option("--backend", o.backend, "fixture | http")->check(CLI::IsMember({"fixture", "http"}));
  cmd->add_option("--endpoint", o.endpoint, "base URL of an HTTP backend");
  cmd->add_option("--fixture", o.fixture, "fixture document for the fixture backend");
  cmd->add_option("--cache-dir", o.cache_dir, "root of the explainer cache and weight artifact");
  cmd->add_option("--weights", o.weights, "weight artifact path (default <cache-dir>/weights.json)");
  cmd->add_option("--lambda", o.lambda, "balance between class and description prompts")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--settings", o.settings, "top1,top5,gt")->delimiter(',');
  cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--min-confidence", o.min_confidence, "grounding confidence threshold")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--no-verb-explainer", o.no_verb_explainer, "class prompts only for verbs");
  cmd->add_flag("--no-weighting", o.no_weighting, "uniform verb description weights");
  cmd->add_flag("--no-grounding-explainer", o.no_grounding_explainer, "ground with the raw template");
  cmd->add_flag("--no-filter", o.no_filter, "score every noun for every role");
  cmd->add_flag("--no-noun-explainer", o.no_noun_explainer, "class prompts only for nouns");
  cmd->add_flag("--no-refine", o.no_refine, "keep the most confident box per role");
  auto* joint = cmd->add_flag("--grnd-joint", o.grnd_joint, "grnd needs a correct noun (default)");
  auto* box_only = cmd->add_flag("--grnd-box-only", o.grnd_box_only, "grnd checks the box alone");
  joint->excludes(box_only);
  cmd->add_option("--absent-box", o.absent_box, "strict | ignore")->check(CLI::IsMember({"strict", "ignore"}));
  cmd->add_flag("--quiet", o.quiet, "only print warnings and errors");
}

zsgsr::EngineConfig build_config(const Overrides& o) {
  zsgsr::EngineConfig c;
  if (!o.config_file.empty()) c.merge_json(zsgsr::read_json_file(o.config_file));
  c.apply_environment();
  if (!o.backend.empty()) c.backend = zsgsr::EngineConfig::backend_from_name(o.backend);
  if (!o.endpoint.empty()) c.endpoint = o.endpoint;
  if (!o.fixture.empty()) c.fixture = o.fixture;
  if (!o.cache_dir.empty()) c.cache_dir = o.cache_dir;
  if (!o.weights.empty()) c.weights_path = o.weights;
  if (!o.settings.empty()) c.settings = zsgsr::EngineConfig::parse_settings(o.settings);
  if (o.lambda >= 0.0) c.lambda = o.lambda;
  if (o.jobs > 0) c.jobs = o.jobs;
  if (o.min_confidence >= 0.0) c.min_confidence = o.min_confidence;
  if (o.no_verb_explainer) c.flags.verb_explainer = false;
  if (o.no_weighting) c.flags.weighting = false;
  if (o.no_grounding_explainer) c.flags.grounding_explainer = false;
  if (o.no_filter) c.flags.noun_filter = false;
  if (o.no_noun_explainer) c.flags.noun_explainer = false;
  if (o.no_refine) c.flags.refine = false;
  if (o.grnd_joint) c.eval.grounding = zsgsr::GroundingMode::kJoint;
  if (o.grnd_box_only) c.eval.grounding = zsgsr::GroundingMode::kBoxOnly;
  if (!o.absent_box.empty()) c.eval.absent_box = zsgsr::EngineConfig::absent_box_from_name(o.absent_box);
  if (o.quiet) zsgsr::log::set_threshold(zsgsr::log::Level::kWarning);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot grounded situation recognition"};
  app.require_subcommand(1);

  Overrides o;
  std::string space, annotations, image_root, output, predictions, json_out, label = "zsgsr";

  auto* precompute = app.add_subcommand("precompute", "generate explainer output and verb weights");
  add_common_options(precompute, o);
  precompute->add_option("--space", space, "vocabulary file")->required();

  auto* run = app.add_subcommand("run", "predict frames for every annotated image");
  add_common_options(run, o);
  run->add_option("--space", space, "vocabulary file")->required();
  run->add_option("--annotations", annotations, "SWiG-style annotation file")->required();
  run->add_option("--image-root", image_root, "directory prefixed to image ids");
  run->add_option("--output", output, "prediction JSON-lines file")->required();

  auto* eval = app.add_subcommand("eval", "score predictions and print the metrics table");
  add_common_options(eval, o);
  eval->add_option("--space", space, "vocabulary file")->required();
  eval->add_option("--annotations", annotations, "SWiG-style annotation file")->required();
  eval->add_option("--predictions", predictions, "prediction JSON-lines file")->required();
  eval->add_option("--json", json_out, "also write the report as JSON");
  eval->add_option("--label", label, "row label of the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : zsgsr::kExitFatal;
  }

  try {
    const zsgsr::EngineConfig config = build_config(o);
    if (*eval) {
      zsgsr::cmd_eval(config, {predictions, annotations, space, json_out}, std::cout, label);
      return zsgsr::kExitOk;
    }
    config.validate();
    const auto backend = zsgsr::make_backend(config);
    if (*precompute) return zsgsr::cmd_precompute(config, *backend, space, std::cout);
    return zsgsr::cmd_run(config, *backend, {annotations, space, image_root, output}, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return zsgsr::kExitFatal;
  }
}
