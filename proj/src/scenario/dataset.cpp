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

#include "scenario/dataset.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "common/error.hpp"
#include "common/text.hpp"

namespace effbench {

using json = nlohmann::json;

Dataset::Dataset(std::vector<Instance> instances)
    : instances_(std::move(instances)) {
  std::unordered_set<std::string> seen;
  seen.reserve(instances_.size());
  for (const auto& inst : instances_) {
    if (!seen.insert(inst.id).second)
      Fail(ErrorClass::kConfig, "DuplicateId",
           "instance id \"" + inst.id + "\" appears more than once");
  }
}

Dataset Dataset::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ConfigError("cannot open dataset " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str(), path);
}

Dataset Dataset::Parse(std::string_view jsonl, const std::string& origin) {
  std::vector<Instance> out;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < jsonl.size()) {
    size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (Trim(line).empty()) continue;

    auto where = [&] { return origin + ":" + std::to_string(line_no); };
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      ConfigError("dataset line is not a JSON object at " + where());
    Instance inst;
    auto id = j.find("id");
    if (id == j.end()) ConfigError("dataset line lacks \"id\" at " + where());
    // Numeric ids are accepted and kept in their JSON spelling.
    inst.id = id->is_string() ? id->get<std::string>() : id->dump();
    auto input = j.find("input");
    if (input == j.end() || !input->is_string())
      ConfigError("dataset line lacks string \"input\" at " + where());
    inst.input = input->get<std::string>();
    if (auto refs = j.find("references"); refs != j.end() && !refs->is_null()) {
      if (!refs->is_array())
        ConfigError("\"references\" must be an array at " + where());
      for (const auto& r : *refs) {
        if (!r.is_string())
          ConfigError("non-string reference at " + where());
        inst.references.push_back(r.get<std::string>());
      }
    }
    out.push_back(std::move(inst));
  }
  return Dataset(std::move(out));
}

double Dataset::MeanInputLength() const {
  if (instances_.empty()) return 0.0;
  double total = 0.0;
  for (const auto& inst : instances_) total += CountWords(inst.input);
  return total / static_cast<double>(instances_.size());
}

}  // namespace effbench
