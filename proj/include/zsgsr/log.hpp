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

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace zsgsr::log {

enum class Level { kInfo = 0, kWarning = 1, kError = 2, kSilent = 3 };

inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::kInfo};
  return level;
}

inline void set_threshold(Level level) { threshold().store(level); }

inline void write(Level level, std::string_view message) {
  if (level < threshold().load()) return;
  static std::mutex mu;
  static constexpr const char* kTags[] = {"I", "W", "E"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << kTags[static_cast<int>(level)] << " " << message << "\n";
}

inline void info(std::string_view message) { write(Level::kInfo, message); }
inline void warning(std::string_view message) { write(Level::kWarning, message); }
inline void error(std::string_view message) { write(Level::kError, message); }

}  // namespace zsgsr::log
