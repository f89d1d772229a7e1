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

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ivsens/errors.hpp"

namespace ivsens {

/// Logistic function 1/(1+exp(-x)), split on the sign of x so that neither
/// branch overflows.
inline double expit(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double ex = std::exp(x);
  return ex / (1.0 + ex);
}

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

/// Mixing model w(y; alpha, beta) = expit(alpha + beta * y): the probability
/// that a treated complier-survivor with outcome y belongs to the
/// always-survivor stratum rather than the protected one.
struct MixingModel {
  double alpha = 0.0;
  double beta = 0.0;  // sensitivity parameter, fixed by the analyst
};

inline double mixing_weight(const MixingModel& m, double y) noexcept {
  return expit(m.alpha + m.beta * y);
}

/// Number of attempted outcome reads on censored rows since process start.
/// Each attempt also throws ContractViolation.
std::uint64_t censored_outcome_reads() noexcept;

/// One observed unit (X, Z, D, S, Y). The outcome exists only for survivors.
class ObservationRow {
 public:
  ObservationRow() = default;
  ObservationRow(std::vector<double> x, int z, int d, int s,
                 std::optional<double> y);

  std::span<const double> x() const noexcept { return x_; }
  int z() const noexcept { return z_; }
  int d() const noexcept { return d_; }
  int s() const noexcept { return s_; }
  bool survived() const noexcept { return s_ == 1; }

  /// Outcome of a survivor. Reading it on a censored row is a contract
  /// violation.
  double outcome() const;

  /// Raw optional, for serialization.
  const std::optional<double>& outcome_if_observed() const noexcept {
    return y_;
  }

 private:
  std::vector<double> x_;
  int z_ = 0;
  int d_ = 0;
  int s_ = 0;
  std::optional<double> y_;
};

class Dataset {
 public:
  Dataset() = default;
  /// Validates row shapes. Presence of both instrument arms is checked by the
  /// propensity fits, which report it as Separation.
  explicit Dataset(std::vector<ObservationRow> rows);

  std::size_t size() const noexcept { return rows_.size(); }
  std::size_t covariate_dim() const noexcept { return p_; }
  const std::vector<ObservationRow>& rows() const noexcept { return rows_; }
  const ObservationRow& operator[](std::size_t i) const { return rows_[i]; }

  /// Rows picked by index (with repetition), as used by the bootstrap.
  Dataset resample(std::span<const std::size_t> indices) const;

 private:
  std::vector<ObservationRow> rows_;
  std::size_t p_ = 0;
};

/// Column-major design matrix [1, X] (N rows, p+1 columns), plus the
/// instrument as a 0/1 column.
struct Design {
  std::size_t n = 0;
  std::size_t cols = 0;          // p + 1
  std::vector<double> values;    // column j occupies [j*n, (j+1)*n)
  std::vector<double> z;

  std::span<const double> column(std::size_t j) const {
    return {values.data() + j * n, n};
  }
};

Design make_design(const Dataset& data);

/// Linear predictor gamma' [1, x] for every row.
std::vector<double> linear_predictor(const Design& design,
                                     std::span<const double> gamma);

}  // namespace ivsens
