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

// Line-oriented wire format spoken between the harness and a model under
// test. Every message is one UTF-8 JSON object terminated by '\n':
//
//   harness -> model   {"batch":["..",..],"i":N}    online request
//                      {"file":"<path>","i":0}      offline request
//   model -> harness   {"ready":true,"params":N,"name":".."}   once, first
//                      {"outputs":["..",..],"i":N}  one per request
//
// Model diagnostics belong on stderr. Anything on stdout before the ready
// line is startup chatter; after it, every line must be a response.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace effbench::protocol {

struct RequestLine {
  std::vector<std::string> batch;
  uint64_t batch_index = 0;
  std::optional<std::string> offline_path;

  bool operator==(const RequestLine&) const = default;
};

struct ResponseLine {
  std::vector<std::string> outputs;
  uint64_t batch_index = 0;

  bool operator==(const ResponseLine&) const = default;
};

struct ReadySignal {
  uint64_t params = 0;
  std::string model_name;

  bool operator==(const ReadySignal&) const = default;
};

/// Invalid UTF-8 is replaced with U+FFFD, so these never fail.
std::string EncodeRequest(const std::vector<std::string>& batch,
                          uint64_t batch_index);
std::string EncodeOfflineRequest(const std::string& path, uint64_t batch_index);
std::string EncodeResponse(const std::vector<std::string>& outputs,
                           uint64_t batch_index);
std::string EncodeReady(const ReadySignal& ready);

/// Throws MalformedLine when the line is not a well-formed request.
RequestLine DecodeRequest(std::string_view line);

/// Throws MalformedLine, IndexMismatch or LengthMismatch (all protocol
/// class errors); the message quotes the offending line.
ResponseLine DecodeResponse(std::string_view line, size_t expected_len,
                            uint64_t expected_index);

/// Returns nullopt for anything that is not a ready message. A line that
/// claims `"ready":true` but carries bad fields throws ProtocolError.
std::optional<ReadySignal> ParseReady(std::string_view line);

/// Reassembles '\n'-terminated lines from arbitrarily chunked input.
class LineDecoder {
 public:
  /// Appends `chunk` and returns every line completed by it, without the
  /// terminator (a trailing '\r' is also dropped).
  std::vector<std::string> Feed(std::string_view chunk);

  /// Pops one complete line if buffered.
  std::optional<std::string> Next();

  bool HasPartial() const { return !buffer_.empty(); }
  const std::string& Partial() const { return buffer_; }
  void Append(std::string_view chunk) { buffer_.append(chunk); }

 private:
  std::string buffer_;
};

}  // namespace effbench::protocol
