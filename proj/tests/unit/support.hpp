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


#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "ivsens/core.hpp"
#include "ivsens/rng.hpp"

namespace ivsens::testing {

inline ObservationRow make_row(std::vector<double> x, int z, int d, int s,
                               std::optional<double> y = std::nullopt) {
  return ObservationRow(std::move(x), z, d, s, y);
}

// Six rows, no covariates, (Z, D, S, Y).
inline Dataset hand_dataset() {
  return Dataset({make_row({}, 1, 1, 1, 1.0), make_row({}, 1, 1, 1, 0.0),
                  make_row({}, 1, 0, 1, 0.0), make_row({}, 0, 1, 1, 1.0),
                  make_row({}, 0, 0, 1, 1.0), make_row({}, 0, 0, 0)});
}

// Small random dataset over `patterns` distinct covariate patterns (p = 2),
// with both instrument arms present. Outcomes take a few distinct values.
inline Dataset random_small(std::uint64_t seed, std::size_t n,
                            std::size_t patterns = 4) {
  RandomStream rng(seed);
  const double ys[] = {0.0, 1.0, 2.5, -0.75};
  std::vector<ObservationRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % patterns;
    std::vector<double> x{static_cast<double>(k & 1u), static_cast<double>((k >> 1) & 1u)};
    const int z = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2));
    const int d = static_cast<int>(rng.below(2));
    const int s = rng.uniform() < 0.75 ? 1 : 0;
    std::optional<double> y;
    if (s == 1) y = ys[rng.below(4)];
    rows.emplace_back(std::move(x), z, d, s, y);
  }
  return Dataset(std::move(rows));
}

// No covariates, half the rows encouraged. The untreated complier
// always-survivor share (0.75) exceeds the treated survivor share (0.25), so
// h(alpha) < 0 for every alpha and beta.
inline Dataset no_root_dataset() {
  std::vector<ObservationRow> rows;
  for (int i = 0; i < 3; ++i) rows.push_back(make_row({}, 0, 0, 1, 1.0));
  rows.push_back(make_row({}, 0, 0, 0));
  rows.push_back(make_row({}, 1, 1, 1, 0.0));
  for (int i = 0; i < 3; ++i) rows.push_back(make_row({}, 1, 0, 0));
  return Dataset(std::move(rows));
}

// Per-row propensity that depends only on the covariate pattern.
inline double pattern_propensity(std::span<const double> x) {
  return 0.2 + 0.15 * x[0] + 0.3 * x[1];
}

inline std::vector<double> pattern_propensities(const Dataset& data) {
  std::vector<double> e;
  for (const auto& r : data.rows()) e.push_back(pattern_propensity(r.x()));
  return e;
}

struct OracleSums {
  double numerator = 0.0;
  double denominator = 0.0;  // untreated-arm complier always-survivor share
  double treated_mass = 0.0; // treated-arm survivor share, g = 1
};

// Tabulates rows by (pattern, z, d, s, y) and forms the weighted sums from the
// cell counts.
inline OracleSums oracle_sums(const Dataset& data, double alpha, double beta) {
  using Key = std::tuple<std::vector<double>, int, int, int, double>;
  std::map<Key, int> cells;
  for (const auto& r : data.rows()) {
    const auto& y = r.outcome_if_observed();
    std::vector<double> x(r.x().begin(), r.x().end());
    ++cells[{x, r.z(), r.d(), r.s(), y ? *y : 0.0}];
  }
  OracleSums out;
  const double n = static_cast<double>(data.size());
  for (const auto& [key, count] : cells) {
    const auto& [x, z, d, s, y] = key;
    if (s == 0) continue;
    const double e = pattern_propensity(x);
    const double a = z == 1 ? 1.0 / e : -1.0 / (1.0 - e);
    const double w = 1.0 / (1.0 + std::exp(-(alpha + beta * y)));
    const double weight = d == 1 ? w : 1.0;
    out.numerator += count * y * weight * a / n;
    if (d == 0) out.denominator += count * (-a) / n;
    if (d == 1) out.treated_mass += count * a / n;
  }
  return out;
}

}  // namespace ivsens::testing
