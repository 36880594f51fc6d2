/* Copyright 2026 The effbench Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace effbench {

/// \brief Error classes. The numeric values double as process exit codes.
enum class ErrorClass : int {
  kOther = 1,
  kConfig = 2,
  kProtocol = 3,
  kModelCrash = 4,
  kMetering = 5,
};

/// \brief Every failure raised by the harness. `kind()` is a stable short
/// name such as "LengthMismatch" that tests and the C API match on.
class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message),
        cls_(cls),
        kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return cls_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass cls_;
  std::string kind_;
};

[[noreturn]] inline void Fail(ErrorClass cls, std::string kind,
                              const std::string& message) {
  throw Error(cls, std::move(kind), message);
}

[[noreturn]] inline void ConfigError(const std::string& message) {
  throw Error(ErrorClass::kConfig, "ConfigError", message);
}

/// Clips long offending input for diagnostics.
inline std::string Excerpt(std::string_view text, size_t max_len = 200) {
  if (text.size() <= max_len) return std::string(text);
  return std::string(text.substr(0, max_len)) + "...";
}

}  // namespace effbench
