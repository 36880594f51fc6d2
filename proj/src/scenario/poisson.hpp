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

#include <cstdint>

#include "scenario/rng.hpp"

namespace effbench {

/// \brief Poisson variates from a caller-owned Xoshiro256 stream.
///
/// Means up to kKnuthLimit use Knuth's product of uniforms, which is exact.
/// Larger means use Hormann's transformed rejection with squeeze (PTRS).
class PoissonSampler {
 public:
  static constexpr double kKnuthLimit = 30.0;

  explicit PoissonSampler(double mean);

  double mean() const { return mean_; }

  uint64_t Draw(Xoshiro256& rng) const;

  /// Redraws zeros. Batch sizes use this.
  uint64_t DrawPositive(Xoshiro256& rng) const;

 private:
  uint64_t DrawKnuth(Xoshiro256& rng) const;
  uint64_t DrawPtrs(Xoshiro256& rng) const;

  double mean_;
  double exp_neg_mean_;
  // PTRS constants.
  double log_mean_ = 0;
  double b_ = 0;
  double a_ = 0;
  double inv_alpha_ = 0;
  double vr_ = 0;
};

}  // namespace effbench
