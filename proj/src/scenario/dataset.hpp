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

#include <string>
#include <string_view>
#include <vector>

namespace effbench {

/// One evaluation item.
struct Instance {
  std::string id;
  std::string input;
  std::vector<std::string> references;

  bool operator==(const Instance&) const = default;
};

/// Immutable list of instances with unique ids.
class Dataset {
 public:
  Dataset() = default;
  /// Throws ConfigError("DuplicateId") on repeated ids.
  explicit Dataset(std::vector<Instance> instances);

  /// JSONL, one {"id":..,"input":..,"references":[..]} per line. Blank lines
  /// are skipped. `references` may be omitted.
  static Dataset Load(const std::string& path);
  static Dataset Parse(std::string_view jsonl, const std::string& origin = "");

  size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }
  const Instance& operator[](size_t i) const { return instances_[i]; }
  const std::vector<Instance>& instances() const { return instances_; }

  /// Mean whitespace-token count of the inputs.
  double MeanInputLength() const;

 private:
  std::vector<Instance> instances_;
};

}  // namespace effbench
