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
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ivsens/core.hpp"
#include "ivsens/propensity.hpp"

namespace ivsens {

// Estimators of the complier always-survivor treatment effect
//
//   LATE = E[Y(1,1) - Y(0,1) | S(0) = S(1) = 1, D(0) < D(1)]
//
// from instrument-propensity-weighted (Horvitz-Thompson) sums. Throughout,
// a_i = Z_i/e_i - (1 - Z_i)/(1 - e_i) is the per-row instrument contrast.

enum class LateMethod { Glm3, Cbps3, Cbps2 };
enum class LateStatus { Ok, NoRootForAlpha, GmmNoConvergence, DegenerateDenominator };
enum class SurvivorArm { Treated, Untreated };

std::string_view to_string(LateMethod method);
std::string_view to_string(LateStatus status);
/// Accepts "glm3", "cbps3", "cbps2" (case-insensitive).
std::optional<LateMethod> parse_method(std::string_view text);

struct WeightedMoments {
  double pr_coas_hat = 0.0;                // complier always-survivor share
  double pr_co_survive_treated_hat = 0.0;  // compliers surviving under treatment
  double numerator_y0 = 0.0;               // untreated-arm outcome mass
  double numerator_y1 = 0.0;               // treated-arm outcome mass, w-weighted
};

struct LateEstimate {
  double beta = 0.0;
  LateMethod method = LateMethod::Glm3;
  LateStatus status = LateStatus::Ok;
  std::optional<double> alpha_hat;  // set only when status == Ok
  std::optional<double> late_hat;   // set only when status == Ok
  double pr_coas_hat = 0.0;

  // Diagnostics.
  std::vector<double> gamma;
  double propensity_min = 0.0;
  double propensity_max = 0.0;
  bool extreme_weights = false;
  double balance_norm = 0.0;             // max |balance moment| on [1, X]
  std::optional<double> h_at_alpha;      // |h| certificate, three-step only
  bool multiple_roots = false;
  std::optional<double> gmm_objective;   // CBPS2 only
  bool singular_weighting = false;       // CBPS2 only
};

struct ConfidenceInterval {
  double level = 0.95;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t replicates_used = 0;
  std::size_t replicates_failed = 0;
};

/// (1/N) sum g(Y_i) S_i D_i a_i for the treated arm, or
/// (1/N) sum g(Y_i) S_i (1 - D_i) (-a_i) for the untreated arm. Outcomes of
/// censored rows are never read. Throws PropensityOutOfRange.
double weighted_complier_moment(const Dataset& data,
                                std::span<const double> e_hat,
                                const std::function<double(double)>& g,
                                SurvivorArm arm);

WeightedMoments weighted_moments(const Dataset& data,
                                 std::span<const double> e_hat,
                                 const MixingModel& m);

/// (1/N) sum S_i (w(Y_i) D_i + 1 - D_i) a_i. Zero at the alpha consistent with
/// the mixing model.
double h_alpha(const Dataset& data, std::span<const double> e_hat, double alpha,
               double beta);

struct AlphaSolution {
  bool found = false;
  double alpha = 0.0;
  double h_at_root = 0.0;
  bool multiple_roots = false;
  int sign_changes = 0;
};

inline constexpr double kAlphaBracket = 40.0;
inline constexpr int kAlphaGridPoints = 401;

/// Scans alpha over a 401-point grid on [-40, 40] for a sign change of h and
/// bisects the leftmost bracket down to width 1e-10. `found` is false when h
/// keeps one sign over the whole grid.
AlphaSolution solve_alpha(const Dataset& data, std::span<const double> e_hat,
                          double beta);

/// Plug-in estimate at a fixed mixing model. `method` only labels the result.
LateEstimate estimate_late_plugin(const Dataset& data,
                                  std::span<const double> e_hat,
                                  const MixingModel& m,
                                  LateMethod method = LateMethod::Glm3);

struct Cbps2Fit {
  PropensityFit propensity;
  double alpha = 0.0;
  double objective = 0.0;             // g' Sigma^+ g at the returned point
  std::vector<double> moments;        // p + 2 balance moments on (1, X, W)
  bool singular_weighting = false;    // Sigma condition number above 1e12
  bool converged = false;             // objective <= 1e-6
  int iterations = 0;
  int restarts = 0;
};

/// Joint GMM fit of (gamma, alpha): balances the extended regressor
/// (1, X, W(alpha)) with W_i = S_i (w(Y_i) D_i + 1 - D_i). Never throws for
/// lack of convergence; check `converged`.
Cbps2Fit fit_cbps2_joint(const Dataset& data, double beta);

/// Value of the CBPS2 objective at (gamma, alpha), with its moment vector.
struct Cbps2Objective {
  double value = 0.0;
  std::vector<double> moments;
  bool singular_weighting = false;
};
Cbps2Objective cbps2_objective(const Dataset& data, std::span<const double> gamma,
                               double alpha, double beta);

/// Full pipeline for one assumed beta. GLM3 and CBPS3 fit the propensity, solve
/// for alpha, then plug in; CBPS2 fits (gamma, alpha) jointly, then plugs in.
/// Propensity-fit errors (Separation, SingularDesign, NoConvergence) throw.
LateEstimate estimate_late(const Dataset& data, double beta, LateMethod method);

/// Three-step estimate reusing an existing propensity fit.
LateEstimate estimate_late_three_step(const Dataset& data,
                                      const PropensityFit& propensity,
                                      double beta, LateMethod method);

struct BootstrapSettings {
  std::size_t replicates = 500;
  double level = 0.95;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

/// Percentile bootstrap over resampled rows. Failed replicates are dropped and
/// counted. Throws TooFewSuccessfulReplicates when fewer than
/// max(30, B/2) replicates succeed.
ConfidenceInterval bootstrap_ci(const Dataset& data, double beta,
                                LateMethod method,
                                const BootstrapSettings& settings);

struct SweepResult {
  LateEstimate estimate;
  std::optional<ConfidenceInterval> ci;
  std::optional<std::string> ci_error;
};

std::vector<SweepResult> sensitivity_sweep(
    const Dataset& data, std::span<const double> beta_grid, LateMethod method,
    const std::optional<BootstrapSettings>& ci);

/// Linear-interpolation sample quantile (type 7) of sorted values.
double sorted_quantile(std::span<const double> sorted, double prob);

}  // namespace ivsens
