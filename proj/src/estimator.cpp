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

#include "ivsens/estimator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>

#include "estimator_internal.hpp"
#include "ivsens/kernels.hpp"

namespace ivsens {

std::string_view to_string(LateMethod method) {
  switch (method) {
    case LateMethod::Glm3: return "GLM3";
    case LateMethod::Cbps3: return "CBPS3";
    case LateMethod::Cbps2: return "CBPS2";
  }
  return "unknown";
}

std::string_view to_string(LateStatus status) {
  switch (status) {
    case LateStatus::Ok: return "OK";
    case LateStatus::NoRootForAlpha: return "NoRootForAlpha";
    case LateStatus::GmmNoConvergence: return "GmmNoConvergence";
    case LateStatus::DegenerateDenominator: return "DegenerateDenominator";
  }
  return "unknown";
}

std::optional<LateMethod> parse_method(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "glm3") return LateMethod::Glm3;
  if (lower == "cbps3") return LateMethod::Cbps3;
  if (lower == "cbps2") return LateMethod::Cbps2;
  return std::nullopt;
}

namespace detail {

StudyColumns::StudyColumns(const Dataset& data) : n(data.size()) {
  z.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = data[i];
    z.push_back(row.z());
    if (!row.survived()) continue;
    if (row.d() == 1) {
      treated_survivors.push_back(i);
      treated_y.push_back(row.outcome());
    } else {
      untreated_survivors.push_back(i);
      untreated_y.push_back(row.outcome());
    }
  }
}

void check_propensity(std::span<const double> e_hat, std::size_t n) {
  if (e_hat.size() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "propensity vector length does not match the dataset");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double e = e_hat[i];
    if (!(e > 0.0 && e < 1.0)) {
      throw Error(ErrorCode::PropensityOutOfRange,
                  "propensity at row " + std::to_string(i) +
                      " is outside (0, 1)");
    }
  }
}

std::vector<double> contrast(const StudyColumns& cols,
                             std::span<const double> e_hat) {
  std::vector<double> a(cols.n);
  kernels::ht_contrast(cols.z, e_hat, a);
  return a;
}

double untreated_mass(const StudyColumns& cols, std::span<const double> a) {
  double acc = 0.0;
  for (std::size_t i : cols.untreated_survivors) acc -= a[i];
  return acc / static_cast<double>(cols.n);
}

CompressedH::CompressedH(const StudyColumns& cols, std::span<const double> a,
                         double beta_in)
    : beta(beta_in) {
  const double n = static_cast<double>(cols.n);
  std::map<double, double> by_outcome;
  for (std::size_t k = 0; k < cols.treated_survivors.size(); ++k) {
    by_outcome[cols.treated_y[k]] += a[cols.treated_survivors[k]];
  }
  outcomes.reserve(by_outcome.size());
  weights.reserve(by_outcome.size());
  for (const auto& [y, c] : by_outcome) {
    outcomes.push_back(y);
    weights.push_back(c / n);
  }
  offset = untreated_mass(cols, a);
}

double CompressedH::operator()(double alpha) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    acc += weights[k] * expit(alpha + beta * outcomes[k]);
  }
  return acc - offset;
}

AlphaSolution solve_alpha_compressed(const CompressedH& h) {
  AlphaSolution sol;
  const double step = 2.0 * kAlphaBracket / (kAlphaGridPoints - 1);
  double prev_alpha = -kAlphaBracket;
  double prev_h = h(prev_alpha);
  std::optional<std::pair<double, double>> bracket;
  std::optional<double> exact;
  if (prev_h == 0.0) exact = prev_alpha;

  for (int k = 1; k < kAlphaGridPoints; ++k) {
    const double alpha = -kAlphaBracket + step * k;
    const double value = h(alpha);
    const bool crosses = (prev_h < 0.0 && value > 0.0) ||
                         (prev_h > 0.0 && value < 0.0) ||
                         (value == 0.0 && prev_h != 0.0);
    if (crosses) {
      ++sol.sign_changes;
      if (!bracket && !exact) {
        if (value == 0.0) {
          exact = alpha;
        } else {
          bracket = {prev_alpha, alpha};
        }
      }
    }
    prev_alpha = alpha;
    prev_h = value;
  }
  if (!bracket && !exact) return sol;

  double root;
  if (exact) {
    root = *exact;
  } else {
    auto [lo, hi] = *bracket;
    double h_lo = h(lo);
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double h_mid = h(mid);
      if (h_mid == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((h_mid < 0.0) == (h_lo < 0.0)) {
        lo = mid;
        h_lo = h_mid;
      } else {
        hi = mid;
      }
    }
    root = 0.5 * (lo + hi);
  }
  sol.found = true;
  sol.alpha = root;
  sol.multiple_roots = sol.sign_changes > 1;
  return sol;
}

void fill_propensity_diagnostics(LateEstimate& est, std::span<const double> e_hat) {
  const auto [lo, hi] = std::minmax_element(e_hat.begin(), e_hat.end());
  est.propensity_min = *lo;
  est.propensity_max = *hi;
  est.extreme_weights = has_extreme_weights(e_hat);
}

}  // namespace detail

double weighted_complier_moment(const Dataset& data,
                                std::span<const double> e_hat,
                                const std::function<double(double)>& g,
                                SurvivorArm arm) {
  detail::check_propensity(e_hat, data.size());
  const detail::StudyColumns cols(data);
  const auto a = detail::contrast(cols, e_hat);
  double acc = 0.0;
  if (arm == SurvivorArm::Treated) {
    for (std::size_t k = 0; k < cols.treated_survivors.size(); ++k) {
      acc += g(cols.treated_y[k]) * a[cols.treated_survivors[k]];
    }
  } else {
    for (std::size_t k = 0; k < cols.untreated_survivors.size(); ++k) {
      acc -= g(cols.untreated_y[k]) * a[cols.untreated_survivors[k]];
    }
  }
  return acc / static_cast<double>(data.size());
}

WeightedMoments weighted_moments(const Dataset& data,
                                 std::span<const double> e_hat,
                                 const MixingModel& m) {
  WeightedMoments out;
  auto one = [](double) { return 1.0; };
  auto identity = [](double y) { return y; };
  auto weighted = [&m](double y) { return y * mixing_weight(m, y); };
  out.pr_coas_hat =
      weighted_complier_moment(data, e_hat, one, SurvivorArm::Untreated);
  out.pr_co_survive_treated_hat =
      weighted_complier_moment(data, e_hat, one, SurvivorArm::Treated);
  out.numerator_y0 =
      weighted_complier_moment(data, e_hat, identity, SurvivorArm::Untreated);
  out.numerator_y1 =
      weighted_complier_moment(data, e_hat, weighted, SurvivorArm::Treated);
  return out;
}

// Direct row-by-row evaluation; deliberately independent of StudyColumns.
double h_alpha(const Dataset& data, std::span<const double> e_hat, double alpha,
               double beta) {
  detail::check_propensity(e_hat, data.size());
  const MixingModel m{alpha, beta};
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data[i];
    if (!row.survived()) continue;
    const double w = row.d() == 1 ? mixing_weight(m, row.outcome()) : 1.0;
    const double e = e_hat[i];
    acc += w * (row.z() / e - (1.0 - row.z()) / (1.0 - e));
  }
  return acc / static_cast<double>(data.size());
}

AlphaSolution solve_alpha(const Dataset& data, std::span<const double> e_hat,
                          double beta) {
  detail::check_propensity(e_hat, data.size());
  const detail::StudyColumns cols(data);
  const auto a = detail::contrast(cols, e_hat);
  auto sol = detail::solve_alpha_compressed(detail::CompressedH(cols, a, beta));
  if (sol.found) sol.h_at_root = h_alpha(data, e_hat, sol.alpha, beta);
  return sol;
}

LateEstimate estimate_late_plugin(const Dataset& data,
                                  std::span<const double> e_hat,
                                  const MixingModel& m, LateMethod method) {
  detail::check_propensity(e_hat, data.size());
  LateEstimate est;
  est.beta = m.beta;
  est.method = method;
  detail::fill_propensity_diagnostics(est, e_hat);

  double numerator = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data[i];
    if (!row.survived()) continue;
    const double y = row.outcome();
    const double w = row.d() == 1 ? mixing_weight(m, y) : 1.0;
    const double e = e_hat[i];
    numerator += y * w * (row.z() / e - (1.0 - row.z()) / (1.0 - e));
  }
  numerator /= static_cast<double>(data.size());
  const double denominator = weighted_complier_moment(
      data, e_hat, [](double) { return 1.0; }, SurvivorArm::Untreated);
  est.pr_coas_hat = denominator;
  if (std::abs(denominator) < 1e-12) {
    est.status = LateStatus::DegenerateDenominator;
    return est;
  }
  est.status = LateStatus::Ok;
  est.alpha_hat = m.alpha;
  est.late_hat = numerator / denominator;
  return est;
}

LateEstimate estimate_late_three_step(const Dataset& data,
                                      const PropensityFit& propensity,
                                      double beta, LateMethod method) {
  const Design design = make_design(data);
  const auto e_hat = fitted_propensity(design, propensity.gamma);
  const auto sol = solve_alpha(data, e_hat, beta);

  LateEstimate est;
  if (sol.found) {
    est = estimate_late_plugin(data, e_hat, MixingModel{sol.alpha, beta}, method);
    est.h_at_alpha = std::abs(sol.h_at_root);
    est.multiple_roots = sol.multiple_roots;
  } else {
    est.beta = beta;
    est.method = method;
    est.status = LateStatus::NoRootForAlpha;
    detail::fill_propensity_diagnostics(est, e_hat);
    est.pr_coas_hat = weighted_complier_moment(
        data, e_hat, [](double) { return 1.0; }, SurvivorArm::Untreated);
  }
  est.gamma = propensity.gamma;
  double balance = 0.0;
  for (double v : balance_moments(design, propensity.gamma)) {
    balance = std::max(balance, std::abs(v));
  }
  est.balance_norm = balance;
  return est;
}

LateEstimate estimate_late(const Dataset& data, double beta, LateMethod method) {
  switch (method) {
    case LateMethod::Glm3:
      return estimate_late_three_step(data, fit_logistic_mle(data), beta, method);
    case LateMethod::Cbps3:
      return estimate_late_three_step(data, fit_cbps_balance(data), beta, method);
    case LateMethod::Cbps2: {
      const Cbps2Fit fit = fit_cbps2_joint(data, beta);
      const Design design = make_design(data);
      const auto e_hat = fitted_propensity(design, fit.propensity.gamma);
      LateEstimate est;
      if (fit.converged) {
        est = estimate_late_plugin(data, e_hat, MixingModel{fit.alpha, beta},
                                   LateMethod::Cbps2);
      } else {
        est.beta = beta;
        est.method = LateMethod::Cbps2;
        est.status = LateStatus::GmmNoConvergence;
        detail::fill_propensity_diagnostics(est, e_hat);
        est.pr_coas_hat = weighted_complier_moment(
            data, e_hat, [](double) { return 1.0; }, SurvivorArm::Untreated);
      }
      est.gamma = fit.propensity.gamma;
      est.gmm_objective = fit.objective;
      est.singular_weighting = fit.singular_weighting;
      double balance = 0.0;
      for (std::size_t j = 0; j + 1 < fit.moments.size(); ++j) {
        balance = std::max(balance, std::abs(fit.moments[j]));
      }
      est.balance_norm = balance;
      return est;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

}  // namespace ivsens
