// Copyright 2026 The ivsens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>

#include "ivsens/estimator.hpp"
#include "ivsens/parallel.hpp"
#include "ivsens/rng.hpp"

namespace ivsens {

double sorted_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) {
    throw Error(ErrorCode::InvalidArgument, "quantile of an empty sample");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ConfidenceInterval bootstrap_ci(const Dataset& data, double beta,
                                LateMethod method,
                                const BootstrapSettings& settings) {
  if (settings.replicates < 50) {
    throw Error(ErrorCode::InvalidArgument, "bootstrap needs at least 50 replicates");
  }
  if (!(settings.level > 0.0 && settings.level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence level must be in (0, 1)");
  }

  const std::size_t n = data.size();
  std::vector<std::optional<double>> draws(settings.replicates);
  parallel_for(settings.replicates, settings.threads, [&](std::size_t b) {
    RandomStream stream(child_seed(settings.seed, b));
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(stream.below(n));
    try {
      const LateEstimate est = estimate_late(data.resample(idx), beta, method);
      if (est.status == LateStatus::Ok) draws[b] = *est.late_hat;
    } catch (const Error&) {
      // Degenerate resample (e.g. one instrument arm missing): counted below.
    }
  });

  std::vector<double> values;
  values.reserve(draws.size());
  for (const auto& d : draws) {
    if (d) values.push_back(*d);
  }
  ConfidenceInterval ci;
  ci.level = settings.level;
  ci.replicates_used = values.size();
  ci.replicates_failed = draws.size() - values.size();
  const std::size_t required = std::max<std::size_t>(30, settings.replicates / 2);
  if (values.size() < required) {
    throw Error(ErrorCode::TooFewSuccessfulReplicates,
                std::to_string(values.size()) + " of " +
                    std::to_string(settings.replicates) +
                    " bootstrap replicates succeeded; need " +
                    std::to_string(required));
  }
  std::sort(values.begin(), values.end());
  const double tail = (1.0 - settings.level) / 2.0;
  ci.lower = sorted_quantile(values, tail);
  ci.upper = sorted_quantile(values, 1.0 - tail);
  return ci;
}

std::vector<SweepResult> sensitivity_sweep(
    const Dataset& data, std::span<const double> beta_grid, LateMethod method,
    const std::optional<BootstrapSettings>& ci) {
  if (beta_grid.empty()) {
    throw Error(ErrorCode::InvalidArgument, "beta grid is empty");
  }
  std::vector<SweepResult> out;
  out.reserve(beta_grid.size());
  for (double beta : beta_grid) {
    SweepResult row;
    row.estimate = estimate_late(data, beta, method);
    if (ci) {
      try {
        row.ci = bootstrap_ci(data, beta, method, *ci);
      } catch (const Error& e) {
        row.ci_error = e.what();
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace ivsens
