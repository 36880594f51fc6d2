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

// Brute-force corpus BLEU used as a test oracle. Written without maps or the
// library tokenizer: n-grams are compared position by position.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline Tokens Tokenize(const std::string& text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur += static_cast<char>(c);
    }
  }
  flush();
  return out;
}

inline bool SameGram(const Tokens& a, size_t i, const Tokens& b, size_t j, size_t n) {
  for (size_t k = 0; k < n; ++k)
    if (a[i + k] != b[j + k]) return false;
  return true;
}

inline uint64_t CountIn(const Tokens& hay, const Tokens& g, size_t gi, size_t n) {
  uint64_t c = 0;
  for (size_t j = 0; j + n <= hay.size(); ++j)
    if (SameGram(hay, j, g, gi, n)) ++c;
  return c;
}

struct Stats {
  uint64_t matches[4] = {0, 0, 0, 0};
  uint64_t totals[4] = {0, 0, 0, 0};
  uint64_t hyp_len = 0;
  uint64_t ref_len = 0;
};

inline Stats CorpusStats(const std::vector<std::string>& hyps,
                         const std::vector<std::vector<std::string>>& refs) {
  Stats s;
  for (size_t k = 0; k < hyps.size(); ++k) {
    Tokens h = Tokenize(hyps[k]);
    std::vector<Tokens> rs;
    for (const auto& r : refs[k]) rs.push_back(Tokenize(r));
    s.hyp_len += h.size();
    // Closest reference length, shorter on ties.
    uint64_t best = UINT64_MAX, best_diff = UINT64_MAX;
    for (const auto& r : rs) {
      uint64_t d = r.size() > h.size() ? r.size() - h.size() : h.size() - r.size();
      if (d < best_diff || (d == best_diff && r.size() < best)) {
        best_diff = d;
        best = r.size();
      }
    }
    s.ref_len += best;
    for (size_t n = 1; n <= 4; ++n) {
      if (h.size() < n) continue;
      s.totals[n - 1] += h.size() - n + 1;
      // Each distinct gram once: only at its first occurrence.
      for (size_t i = 0; i + n <= h.size(); ++i) {
        bool first = true;
        for (size_t p = 0; p < i && first; ++p)
          if (SameGram(h, p, h, i, n)) first = false;
        if (!first) continue;
        uint64_t in_hyp = CountIn(h, h, i, n);
        uint64_t max_ref = 0;
        for (const auto& r : rs) max_ref = std::max(max_ref, CountIn(r, h, i, n));
        s.matches[n - 1] += std::min(in_hyp, max_ref);
      }
    }
  }
  return s;
}

inline double Score(const Stats& s) {
  if (s.hyp_len == 0) return 0.0;
  if (s.matches[0] == 0) return 0.0;
  double logs = 0.0;
  for (int n = 0; n < 4; ++n) {
    double p = s.matches[n] > 0 ? double(s.matches[n]) / double(s.totals[n])
                                : 1.0 / (double(s.totals[n]) + 1.0);
    logs += std::log(p);
  }
  double bp = s.hyp_len <= s.ref_len ? std::exp(1.0 - double(s.ref_len) / double(s.hyp_len)) : 1.0;
  return 100.0 * bp * std::exp(logs / 4.0);
}

}  // namespace oracle
