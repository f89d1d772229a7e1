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
#include <string>
#include <string_view>
#include <vector>

#include "ivsens/core.hpp"

namespace ivsens {

// Logistic model for the instrument propensity e(x) = Pr(Z = 1 | x). The
// intercept is always the first coefficient.

enum class PropensityMethod { Mle, CbpsBalance, CbpsJoint };

std::string_view to_string(PropensityMethod method);

struct PropensityFit {
  std::vector<double> gamma;  // length p + 1, intercept first
  PropensityMethod method = PropensityMethod::Mle;
  bool converged = false;
  int iterations = 0;
  double max_abs_moment = 0.0;  // final score (MLE) or balance (CBPS) norm
  // Any fitted e below 1e-6 or above 1 - 1e-6. Weights are never truncated.
  bool extreme_weights = false;
};

double predict(const PropensityFit& fit, std::span<const double> x);

/// Fitted propensities for every row of the design.
std::vector<double> fitted_propensity(const Design& design,
                                      std::span<const double> gamma);

/// (1/N) sum (Z_i - e_i) [1, X_i], evaluated from scratch.
std::vector<double> score_moments(const Design& design,
                                  std::span<const double> gamma);

/// (1/N) sum { Z_i/e_i - (1 - Z_i)/(1 - e_i) } [1, X_i], evaluated from scratch.
std::vector<double> balance_moments(const Design& design,
                                    std::span<const double> gamma);

/// Logistic maximum likelihood by IRLS with step-halving. Throws
/// SingularDesign, Separation or NoConvergence.
PropensityFit fit_logistic_mle(const Dataset& data);
PropensityFit fit_logistic_mle(const Design& design);

/// Just-identified covariate-balancing fit: zero of balance_moments, by damped
/// Newton with a finite-difference Jacobian, warm-started at the MLE.
PropensityFit fit_cbps_balance(const Dataset& data);
PropensityFit fit_cbps_balance(const Design& design);

namespace detail {
// Shared preconditions of every propensity fit.
void check_fit_preconditions(const Design& design);
bool has_extreme_weights(std::span<const double> e_hat);
}  // namespace detail

}  // namespace ivsens
