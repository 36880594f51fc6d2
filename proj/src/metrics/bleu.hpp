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

// Corpus BLEU, built in so scores never depend on an external tool.
//
// Tokenization: split on whitespace, then split every ASCII punctuation
// character off as a token of its own ("end." -> "end", ".").
// Score: 100 * BP * exp(mean_n log p_n) for n = 1..4, where p_n is the
// clipped n-gram precision (clipping against the per-reference maximum
// count). For n >= 2 a zero numerator is smoothed to 1 / (total_n + 1).
// BP = exp(1 - r/c) when c <= r, else 1, with c the hypothesis length and r
// the summed closest reference lengths (ties go to the shorter reference).
// Scores are comparable within this harness only.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace effbench::metrics {

inline constexpr int kBleuMaxOrder = 4;

std::vector<std::string> BleuTokenize(std::string_view text);

struct BleuStats {
  std::array<uint64_t, kBleuMaxOrder> matches{};
  std::array<uint64_t, kBleuMaxOrder> totals{};
  uint64_t hyp_len = 0;
  uint64_t ref_len = 0;

  bool operator==(const BleuStats&) const = default;
};

/// Throws LengthMismatch, EmptyHypothesisSet, or MissingReference when an
/// instance has no reference.
BleuStats CorpusBleuStats(const std::vector<std::string>& hypotheses,
                          const std::vector<std::vector<std::string>>& references);

double BleuFromStats(const BleuStats& stats);

/// Score in [0, 100].
double CorpusBleu(const std::vector<std::string>& hypotheses,
                  const std::vector<std::vector<std::string>>& references);

}  // namespace effbench::metrics
