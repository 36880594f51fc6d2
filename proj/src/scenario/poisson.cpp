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

#include "scenario/poisson.hpp"

#include <cmath>

#include "common/error.hpp"

namespace effbench {

PoissonSampler::PoissonSampler(double mean) : mean_(mean) {
  if (!(mean > 0.0) || !std::isfinite(mean))
    ConfigError("poisson mean must be a positive finite number");
  exp_neg_mean_ = std::exp(-mean);
  if (mean > kKnuthLimit) {
    const double sqrt_mean = std::sqrt(mean);
    log_mean_ = std::log(mean);
    b_ = 0.931 + 2.53 * sqrt_mean;
    a_ = -0.059 + 0.02483 * b_;
    inv_alpha_ = 1.1239 + 1.1328 / (b_ - 3.4);
    vr_ = 0.9277 - 3.6224 / (b_ - 2.0);
  }
}

uint64_t PoissonSampler::Draw(Xoshiro256& rng) const {
  return mean_ > kKnuthLimit ? DrawPtrs(rng) : DrawKnuth(rng);
}

uint64_t PoissonSampler::DrawPositive(Xoshiro256& rng) const {
  for (;;) {
    uint64_t k = Draw(rng);
    if (k > 0) return k;
  }
}

uint64_t PoissonSampler::DrawKnuth(Xoshiro256& rng) const {
  uint64_t k = 0;
  double p = rng.NextDouble();
  while (p > exp_neg_mean_) {
    ++k;
    p *= rng.NextDouble();
  }
  return k;
}

uint64_t PoissonSampler::DrawPtrs(Xoshiro256& rng) const {
  for (;;) {
    const double u = rng.NextDouble() - 0.5;
    const double v = rng.NextDouble();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a_ / us + b_) * u + mean_ + 0.43);
    if (us >= 0.07 && v <= vr_) return static_cast<uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    const double lhs =
        std::log(v) + std::log(inv_alpha_) - std::log(a_ / (us * us) + b_);
    const double rhs = -mean_ + k * log_mean_ - std::lgamma(k + 1.0);
    if (lhs <= rhs) return static_cast<uint64_t>(k);
  }
}

}  // namespace effbench
