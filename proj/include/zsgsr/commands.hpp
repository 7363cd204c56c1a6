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

// The three batch commands. Each returns a process exit code; fatal
// configuration or data errors propagate as exceptions and map to
// kExitFatal in main.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "zsgsr/dataset_io.hpp"
#include "zsgsr/engine.hpp"
#include "zsgsr/evaluator.hpp"

namespace zsgsr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitFatal = 2;

inline int cmd_precompute(const EngineConfig& config, const Backend& backend,
                          const std::filesystem::path& space_path, std::ostream& out) {
  const DatasetBundle vocab = load_vocabulary(space_path);
  Engine engine(config, backend, vocab);
  const PrecomputeSummary summary = engine.precompute();
  out << "precomputed " << summary.verbs << " verbs; weights at "
      << config.resolved_weights_path().string() << "\n";
  for (const std::string& f : summary.failures) out << "degraded: " << f << "\n";
  return summary.failures.empty() ? kExitOk : kExitPartial;
}

struct RunPaths {
  std::filesystem::path annotations;
  std::filesystem::path space;
  std::filesystem::path image_root;
  std::filesystem::path output;
};

inline int cmd_run(const EngineConfig& config, const Backend& backend, const RunPaths& paths,
                   std::ostream& out) {
  const DatasetBundle bundle = load_dataset(paths.annotations, paths.space, paths.image_root);
  Engine engine(config, backend, bundle);
  const RunSummary summary = engine.run(paths.output);
  out << "wrote " << summary.written << "/" << summary.images << " records to " << paths.output.string()
      << " (" << summary.reused << " reused, " << summary.failures.size() << " failed)\n";
  for (const std::string& f : summary.failures) out << "failed: " << f << "\n";
  return summary.failures.empty() ? kExitOk : kExitPartial;
}

struct EvalPaths {
  std::filesystem::path predictions;
  std::filesystem::path annotations;
  std::filesystem::path space;
  // Optional machine-readable twin of the table.
  std::filesystem::path json_out;
};

inline MetricsReport cmd_eval(const EngineConfig& config, const EvalPaths& paths, std::ostream& out,
                              std::string_view label = "zsgsr") {
  const DatasetBundle bundle = load_dataset(paths.annotations, paths.space);
  const auto records = load_predictions(paths.predictions);
  const MetricsReport report = evaluate_predictions(records, bundle, config.settings, config.eval);
  out << render_report(report, label);
  if (!paths.json_out.empty()) write_file_atomic(paths.json_out, report_to_json(report, label).dump(2) + "\n");
  return report;
}

}  // namespace zsgsr
