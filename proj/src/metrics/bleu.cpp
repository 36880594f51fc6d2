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

#include "metrics/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "common/error.hpp"
#include "common/text.hpp"

namespace effbench::metrics {
namespace {

bool IsAsciiPunct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

using NgramCounts = std::map<std::vector<std::string_view>, uint64_t>;

NgramCounts CountNgrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (tokens.size() < static_cast<size_t>(n)) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
    std::vector<std::string_view> gram(tokens.begin() + static_cast<ptrdiff_t>(i),
                                       tokens.begin() + static_cast<ptrdiff_t>(i) + n);
    ++counts[gram];
  }
  return counts;
}

}  // namespace

std::vector<std::string> BleuTokenize(std::string_view text) {
  std::vector<std::string> out;
  for (std::string_view word : SplitWhitespace(text)) {
    std::string current;
    for (char c : word) {
      if (IsAsciiPunct(c)) {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
        out.emplace_back(1, c);
      } else {
        current += c;
      }
    }
    if (!current.empty()) out.push_back(std::move(current));
  }
  return out;
}

BleuStats CorpusBleuStats(const std::vector<std::string>& hypotheses,
                          const std::vector<std::vector<std::string>>& references) {
  if (hypotheses.size() != references.size())
    Fail(ErrorClass::kOther, "LengthMismatch",
         std::to_string(hypotheses.size()) + " hypotheses but " +
             std::to_string(references.size()) + " reference sets");
  if (hypotheses.empty())
    Fail(ErrorClass::kOther, "EmptyHypothesisSet", "no hypotheses to score");

  BleuStats stats;
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    if (references[s].empty())
      Fail(ErrorClass::kOther, "MissingReference",
           "instance " + std::to_string(s) + " has no reference");
    std::vector<std::string> hyp = BleuTokenize(hypotheses[s]);
    std::vector<std::vector<std::string>> refs;
    refs.reserve(references[s].size());
    for (const auto& r : references[s]) refs.push_back(BleuTokenize(r));

    const uint64_t c = hyp.size();
    uint64_t best_ref = refs.front().size();
    for (const auto& r : refs) {
      uint64_t len = r.size();
      uint64_t d_new = len > c ? len - c : c - len;
      uint64_t d_best = best_ref > c ? best_ref - c : c - best_ref;
      if (d_new < d_best || (d_new == d_best && len < best_ref)) best_ref = len;
    }
    stats.hyp_len += c;
    stats.ref_len += best_ref;

    for (int n = 1; n <= kBleuMaxOrder; ++n) {
      NgramCounts hyp_counts = CountNgrams(hyp, n);
      NgramCounts max_ref;
      for (const auto& r : refs)
        for (const auto& [gram, cnt] : CountNgrams(r, n))
          max_ref[gram] = std::max(max_ref[gram], cnt);
      for (const auto& [gram, cnt] : hyp_counts) {
        auto it = max_ref.find(gram);
        stats.matches[n - 1] += it == max_ref.end() ? 0 : std::min(cnt, it->second);
        stats.totals[n - 1] += cnt;
      }
    }
  }
  return stats;
}

double BleuFromStats(const BleuStats& stats) {
  if (stats.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kBleuMaxOrder; ++n) {
    double num = static_cast<double>(stats.matches[n]);
    double den = static_cast<double>(stats.totals[n]);
    if (stats.matches[n] == 0) {
      if (n == 0) return 0.0;
      num = 1.0;
      den += 1.0;
    }
    log_sum += std::log(num / den);
  }
  double c = static_cast<double>(stats.hyp_len);
  double r = static_cast<double>(stats.ref_len);
  double bp = c <= r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_sum / kBleuMaxOrder);
}

double CorpusBleu(const std::vector<std::string>& hypotheses,
                  const std::vector<std::vector<std::string>>& references) {
  return BleuFromStats(CorpusBleuStats(hypotheses, references));
}

}  // namespace effbench::metrics
