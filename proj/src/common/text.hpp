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

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace effbench {

/// Space, tab, newline, vertical tab, form feed, carriage return.
inline bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' ||
         c == '\r';
}

/// Number of maximal runs of non-whitespace characters.
size_t CountWords(std::string_view text);

std::vector<std::string_view> SplitWhitespace(std::string_view text);

std::string_view Trim(std::string_view text);

/// Offline instance files hold one input per line. Backslash, newline and
/// carriage return are written as `\\`, `\n` and `\r`; nothing else changes.
std::string EscapeLine(std::string_view text);
std::string UnescapeLine(std::string_view line);

/// FNV-1a, 64 bit. Used for plan digests in reports.
uint64_t Fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL);

std::string Hex64(uint64_t value);

}  // namespace effbench
