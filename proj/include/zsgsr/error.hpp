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

#include <stdexcept>
#include <string>

namespace zsgsr {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateInput,
  kTransport,
  kProtocol,
  kNotFound,
  kFixtureMiss,
  kGenerationFailed,
  kGroundingFailed,
  kDataError,
  kLoadError,
  kIo,
  kInternal,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kFixtureMiss: return "fixture-miss";
    case ErrorCode::kGenerationFailed: return "generation-failed";
    case ErrorCode::kGroundingFailed: return "grounding-failed";
    case ErrorCode::kDataError: return "data-error";
    case ErrorCode::kLoadError: return "load-error";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

// Base class of every error raised by the library. The message is prefixed
// with the code name so that CLI output stays greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised after the retry policy of a remote backend is exhausted.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts, int last_status)
      : Error(ErrorCode::kTransport, message),
        attempts_(attempts),
        last_status_(last_status) {}

  int attempts() const noexcept { return attempts_; }
  // HTTP status of the final attempt, 0 when no response was received.
  int last_status() const noexcept { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace zsgsr
