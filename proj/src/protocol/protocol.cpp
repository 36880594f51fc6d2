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

#include "protocol/protocol.hpp"

#include <json.hpp>

#include "common/error.hpp"

namespace effbench::protocol {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

std::string Dump(const ordered_json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

[[noreturn]] void Malformed(std::string_view line, const std::string& why) {
  Fail(ErrorClass::kProtocol, "MalformedLine",
       why + " in line: " + Excerpt(line));
}

std::string_view StripCr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

json ParseObject(std::string_view line) {
  json j = json::parse(StripCr(line), nullptr, false);
  if (j.is_discarded() || !j.is_object()) Malformed(line, "not a JSON object");
  return j;
}

uint64_t ReadIndex(const json& j, std::string_view line) {
  auto it = j.find("i");
  if (it == j.end() || !it->is_number_integer())
    Malformed(line, "missing integer field \"i\"");
  if (it->is_number_unsigned()) return it->get<uint64_t>();
  int64_t v = it->get<int64_t>();
  if (v < 0) Malformed(line, "negative batch index");
  return static_cast<uint64_t>(v);
}

std::vector<std::string> ReadStrings(const json& j, const char* key,
                                     std::string_view line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    Malformed(line, std::string("missing array field \"") + key + "\"");
  std::vector<std::string> out;
  out.reserve(it->size());
  for (const auto& el : *it) {
    if (!el.is_string())
      Malformed(line, std::string("non-string element in \"") + key + "\"");
    out.push_back(el.get<std::string>());
  }
  return out;
}

}  // namespace

std::string EncodeRequest(const std::vector<std::string>& batch,
                          uint64_t batch_index) {
  ordered_json j;
  j["batch"] = batch;
  j["i"] = batch_index;
  return Dump(j);
}

std::string EncodeOfflineRequest(const std::string& path,
                                 uint64_t batch_index) {
  ordered_json j;
  j["file"] = path;
  j["i"] = batch_index;
  return Dump(j);
}

std::string EncodeResponse(const std::vector<std::string>& outputs,
                           uint64_t batch_index) {
  ordered_json j;
  j["outputs"] = outputs;
  j["i"] = batch_index;
  return Dump(j);
}

std::string EncodeReady(const ReadySignal& ready) {
  ordered_json j;
  j["ready"] = true;
  j["params"] = ready.params;
  j["name"] = ready.model_name;
  return Dump(j);
}

RequestLine DecodeRequest(std::string_view line) {
  json j = ParseObject(line);
  RequestLine req;
  req.batch_index = ReadIndex(j, line);
  bool has_batch = j.contains("batch");
  bool has_file = j.contains("file");
  if (has_batch == has_file)
    Malformed(line, "request needs exactly one of \"batch\" or \"file\"");
  if (has_batch) {
    req.batch = ReadStrings(j, "batch", line);
    if (req.batch.empty()) Malformed(line, "empty batch");
  } else {
    if (!j["file"].is_string()) Malformed(line, "\"file\" is not a string");
    req.offline_path = j["file"].get<std::string>();
  }
  return req;
}

ResponseLine DecodeResponse(std::string_view line, size_t expected_len,
                            uint64_t expected_index) {
  json j = ParseObject(line);
  ResponseLine resp;
  resp.batch_index = ReadIndex(j, line);
  resp.outputs = ReadStrings(j, "outputs", line);
  if (resp.batch_index != expected_index) {
    Fail(ErrorClass::kProtocol, "IndexMismatch",
         "expected i=" + std::to_string(expected_index) + ", got i=" +
             std::to_string(resp.batch_index) + " in line: " + Excerpt(line));
  }
  if (resp.outputs.size() != expected_len) {
    Fail(ErrorClass::kProtocol, "LengthMismatch",
         "expected " + std::to_string(expected_len) + " outputs, got " +
             std::to_string(resp.outputs.size()) + " in line: " +
             Excerpt(line));
  }
  return resp;
}

std::optional<ReadySignal> ParseReady(std::string_view line) {
  json j = json::parse(StripCr(line), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto ready = j.find("ready");
  if (ready == j.end() || !ready->is_boolean() || !ready->get<bool>())
    return std::nullopt;

  ReadySignal sig;
  auto params = j.find("params");
  if (params == j.end() || !params->is_number_integer() ||
      (!params->is_number_unsigned() && params->get<int64_t>() < 0)) {
    Fail(ErrorClass::kProtocol, "ProtocolError",
         "ready line needs a non-negative integer \"params\": " +
             Excerpt(line));
  }
  sig.params = params->get<uint64_t>();
  auto name = j.find("name");
  if (name != j.end()) {
    if (!name->is_string())
      Fail(ErrorClass::kProtocol, "ProtocolError",
           "ready line \"name\" must be a string: " + Excerpt(line));
    sig.model_name = name->get<std::string>();
  }
  return sig;
}

std::vector<std::string> LineDecoder::Feed(std::string_view chunk) {
  buffer_.append(chunk);
  std::vector<std::string> lines;
  while (auto line = Next()) lines.push_back(std::move(*line));
  return lines;
}

std::optional<std::string> LineDecoder::Next() {
  size_t pos = buffer_.find('\n');
  if (pos == std::string::npos) return std::nullopt;
  std::string line = buffer_.substr(0, pos);
  buffer_.erase(0, pos + 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace effbench::protocol
