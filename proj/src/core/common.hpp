// Copyright 2026 The GameIRL Authors
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

#ifndef GAMEIRL_CORE_COMMON_HPP_
#define GAMEIRL_CORE_COMMON_HPP_

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace gameirl {

// Exit/status codes shared by the CLI and the C API.
enum StatusCode : int {
  kOk = 0,
  kUsageError = 1,
  kStageError = 2,
  kDivergence = 3,
};

// Invalid arguments, malformed config, bad file contents.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// A pipeline stage failed (missing artifact, unmet threshold, I/O failure).
class StageError : public std::runtime_error {
 public:
  explicit StageError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss and was aborted.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

inline int status_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kUsageError;
  if (dynamic_cast<const DivergenceError*>(&e)) return kDivergence;
  return kStageError;
}

// GAMEIRL_STRICT=1 forces single-threaded, bitwise-reproducible execution.
inline bool strict_mode() {
  const char* v = std::getenv("GAMEIRL_STRICT");
  return v != nullptr && v[0] == '1';
}

}  // namespace gameirl

#endif  // GAMEIRL_CORE_COMMON_HPP_
