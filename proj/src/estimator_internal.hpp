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

#include <span>
#include <vector>

#include "ivsens/estimator.hpp"

namespace ivsens::detail {

// Survivor outcomes split by treatment, read once. Censored outcomes are never
// touched.
struct StudyColumns {
  explicit StudyColumns(const Dataset& data);

  std::size_t n = 0;
  std::vector<double> z;
  std::vector<std::size_t> treated_survivors;    // S = 1, D = 1
  std::vector<double> treated_y;
  std::vector<std::size_t> untreated_survivors;  // S = 1, D = 0
  std::vector<double> untreated_y;
};

void check_propensity(std::span<const double> e_hat, std::size_t n);

std::vector<double> contrast(const StudyColumns& cols,
                             std::span<const double> e_hat);

/// (1/N) sum over untreated survivors of -a_i: the complier always-survivor
/// share estimate.
double untreated_mass(const StudyColumns& cols, std::span<const double> a);

// h(alpha) with treated survivors pooled by distinct outcome value, so each
// evaluation costs one expit per distinct outcome rather than per row.
struct CompressedH {
  CompressedH(const StudyColumns& cols, std::span<const double> a, double beta);
  double operator()(double alpha) const;

  double beta = 0.0;
  std::vector<double> outcomes;
  std::vector<double> weights;
  double offset = 0.0;
};

AlphaSolution solve_alpha_compressed(const CompressedH& h);

void fill_propensity_diagnostics(LateEstimate& est, std::span<const double> e_hat);

}  // namespace ivsens::detail
