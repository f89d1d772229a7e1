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

#include "ivsens/propensity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ivsens/kernels.hpp"
#include "ivsens/rng.hpp"

namespace ivsens {
namespace {

constexpr int kMaxIrlsIterations = 100;
constexpr double kScoreTolerance = 1e-12;
constexpr int kMaxNewtonIterations = 100;
constexpr double kBalanceTolerance = 1e-10;
constexpr int kBalanceRestarts = 5;

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Sum of z*eta - log(1 + exp(eta)), written to avoid overflow.
double log_likelihood(const Design& design, std::span<const double> eta) {
  double ll = 0.0;
  for (std::size_t i = 0; i < design.n; ++i) {
    const double t = eta[i];
    const double log1pexp = std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
    ll += design.z[i] * t - log1pexp;
  }
  return ll;
}

// Weighted Gram matrix X' diag(w) X.
Eigen::MatrixXd weighted_gram(const Design& design, std::span<const double> w) {
  const auto k = static_cast<Eigen::Index>(design.cols);
  Eigen::MatrixXd g(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v = kernels::dot3(design.column(a), design.column(b), w);
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  return g;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

std::string_view to_string(PropensityMethod method) {
  switch (method) {
    case PropensityMethod::Mle: return "MLE";
    case PropensityMethod::CbpsBalance: return "CBPS-balance";
    case PropensityMethod::CbpsJoint: return "CBPS-joint";
  }
  return "unknown";
}

double predict(const PropensityFit& fit, std::span<const double> x) {
  if (x.size() + 1 != fit.gamma.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "covariate vector has length " + std::to_string(x.size()) +
                    ", fit expects " + std::to_string(fit.gamma.size() - 1));
  }
  double eta = fit.gamma[0];
  for (std::size_t j = 0; j < x.size(); ++j) eta += fit.gamma[j + 1] * x[j];
  return expit(eta);
}

std::vector<double> fitted_propensity(const Design& design,
                                      std::span<const double> gamma) {
  auto e = linear_predictor(design, gamma);
  for (double& v : e) v = expit(v);
  return e;
}

std::vector<double> score_moments(const Design& design,
                                  std::span<const double> gamma) {
  const auto e = fitted_propensity(design, gamma);
  std::vector<double> resid(design.n);
  for (std::size_t i = 0; i < design.n; ++i) resid[i] = design.z[i] - e[i];
  std::vector<double> out(design.cols);
  for (std::size_t j = 0; j < design.cols; ++j) {
    out[j] = kernels::dot(design.column(j), resid) / static_cast<double>(design.n);
  }
  return out;
}

std::vector<double> balance_moments(const Design& design,
                                    std::span<const double> gamma) {
  const auto e = fitted_propensity(design, gamma);
  std::vector<double> contrast(design.n);
  kernels::ht_contrast(design.z, e, contrast);
  std::vector<double> out(design.cols);
  for (std::size_t j = 0; j < design.cols; ++j) {
    out[j] =
        kernels::dot(design.column(j), contrast) / static_cast<double>(design.n);
  }
  return out;
}

namespace detail {

void check_fit_preconditions(const Design& design) {
  const double treated = kernels::sum(design.z);
  if (treated == 0.0 || treated == static_cast<double>(design.n)) {
    throw Error(ErrorCode::Separation,
                "instrument takes a single value; propensity is degenerate");
  }
  std::vector<double> ones(design.n, 1.0);
  const Eigen::MatrixXd gram = weighted_gram(design, ones);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const auto& ev = eig.eigenvalues();
  if (ev.minCoeff() <= 1e-12 * ev.maxCoeff()) {
    throw Error(ErrorCode::SingularDesign,
                "design matrix [1, X] is rank deficient");
  }
}

bool has_extreme_weights(std::span<const double> e_hat) {
  return std::any_of(e_hat.begin(), e_hat.end(),
                     [](double e) { return e < 1e-6 || e > 1.0 - 1e-6; });
}

}  // namespace detail

PropensityFit fit_logistic_mle(const Dataset& data) {
  return fit_logistic_mle(make_design(data));
}

PropensityFit fit_logistic_mle(const Design& design) {
  detail::check_fit_preconditions(design);
  const auto k = static_cast<Eigen::Index>(design.cols);
  const double n = static_cast<double>(design.n);

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(k);
  const double zbar = kernels::sum(design.z) / n;
  gamma(0) = logit(zbar);

  std::vector<double> eta = linear_predictor(design, to_vector(gamma));
  double ll = log_likelihood(design, eta);
  std::vector<double> e(design.n), resid(design.n), var(design.n);

  PropensityFit fit;
  fit.method = PropensityMethod::Mle;
  for (int iter = 1; iter <= kMaxIrlsIterations; ++iter) {
    // Checked before the score test: under separation the score also
    // vanishes as the coefficients diverge.
    const auto [lo, hi] = std::minmax_element(eta.begin(), eta.end());
    const double extreme = std::max(std::abs(*lo), std::abs(*hi));
    // expit(27.6) is within 1e-12 of 1.
    if (extreme > 27.6 && gamma.norm() > 25.0) {
      throw Error(ErrorCode::Separation,
                  "fitted propensities approach 0 or 1 with diverging "
                  "coefficients (quasi-complete separation)");
    }
    for (std::size_t i = 0; i < design.n; ++i) {
      e[i] = expit(eta[i]);
      resid[i] = design.z[i] - e[i];
      var[i] = e[i] * (1.0 - e[i]);
    }
    Eigen::VectorXd score(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      score(j) = kernels::dot(design.column(j), resid);
    }
    fit.iterations = iter;
    if (score.cwiseAbs().maxCoeff() / n < kScoreTolerance) {
      fit.converged = true;
      break;
    }
    const Eigen::MatrixXd info = weighted_gram(design, var);
    const Eigen::VectorXd step = info.ldlt().solve(score);
    if (!step.allFinite()) {
      throw Error(ErrorCode::Separation, "information matrix became singular");
    }

    double scale = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving) {
      const Eigen::VectorXd trial = gamma + scale * step;
      auto trial_eta = linear_predictor(design, to_vector(trial));
      const double trial_ll = log_likelihood(design, trial_eta);
      if (trial_ll >= ll - 1e-12 * std::abs(ll)) {
        gamma = trial;
        eta = std::move(trial_eta);
        ll = trial_ll;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }

  // A finite maximizer cannot put a fitted probability within 1e-10 of 0 or 1
  // (|eta| > 23) unless a covariate cell is empty in one arm.
  const auto [lo, hi] = std::minmax_element(eta.begin(), eta.end());
  if (std::max(std::abs(*lo), std::abs(*hi)) > 23.0) {
    throw Error(ErrorCode::Separation,
                "fitted propensities within 1e-10 of 0 or 1 (quasi-complete "
                "separation)");
  }

  fit.gamma = to_vector(gamma);
  const auto moments = score_moments(design, fit.gamma);
  fit.max_abs_moment = max_abs(moments);
  if (!fit.converged || fit.max_abs_moment >= 1e-9) {
    throw Error(ErrorCode::NoConvergence,
                "logistic regression did not converge (max |score| = " +
                    std::to_string(fit.max_abs_moment) + ")");
  }
  fit.extreme_weights =
      detail::has_extreme_weights(fitted_propensity(design, fit.gamma));
  return fit;
}

PropensityFit fit_cbps_balance(const Dataset& data) {
  return fit_cbps_balance(make_design(data));
}

PropensityFit fit_cbps_balance(const Design& design) {
  const PropensityFit warm = fit_logistic_mle(design);
  const auto k = static_cast<Eigen::Index>(design.cols);

  auto moments = [&](const Eigen::VectorXd& g) {
    const auto m = balance_moments(design, to_vector(g));
    return Eigen::Map<const Eigen::VectorXd>(m.data(), k).eval();
  };

  RandomStream jitter(0x6362707362616cULL);
  Eigen::VectorXd best;
  double best_norm = std::numeric_limits<double>::infinity();
  int total_iterations = 0;

  for (int attempt = 0; attempt <= kBalanceRestarts; ++attempt) {
    Eigen::VectorXd gamma =
        Eigen::Map<const Eigen::VectorXd>(warm.gamma.data(), k);
    if (attempt > 0) {
      // Uniform direction, radius uniform in [0, 1).
      Eigen::VectorXd dir(k);
      for (Eigen::Index j = 0; j < k; ++j) dir(j) = jitter.uniform() - 0.5;
      gamma += jitter.uniform() * dir / std::max(dir.norm(), 1e-12);
    }
    Eigen::VectorXd m = moments(gamma);
    double merit = m.squaredNorm();
    for (int iter = 0; iter < kMaxNewtonIterations; ++iter) {
      ++total_iterations;
      if (m.cwiseAbs().maxCoeff() < kBalanceTolerance) break;
      Eigen::MatrixXd jac(k, k);
      for (Eigen::Index j = 0; j < k; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(gamma(j)));
        Eigen::VectorXd up = gamma;
        Eigen::VectorXd dn = gamma;
        up(j) += h;
        dn(j) -= h;
        jac.col(j) = (moments(up) - moments(dn)) / (2.0 * h);
      }
      const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-m);
      if (!step.allFinite()) break;
      double scale = 1.0;
      bool improved = false;
      for (int halving = 0; halving < 30; ++halving) {
        const Eigen::VectorXd trial = gamma + scale * step;
        const Eigen::VectorXd tm = moments(trial);
        const double tmerit = tm.squaredNorm();
        if (std::isfinite(tmerit) && tmerit < merit) {
          gamma = trial;
          m = tm;
          merit = tmerit;
          improved = true;
          break;
        }
        scale *= 0.5;
      }
      if (!improved) break;
    }
    const double norm = m.cwiseAbs().maxCoeff();
    if (norm < best_norm) {
      best_norm = norm;
      best = gamma;
    }
    if (best_norm < kBalanceTolerance) break;
  }

  PropensityFit fit;
  fit.method = PropensityMethod::CbpsBalance;
  fit.gamma = to_vector(best);
  fit.iterations = total_iterations;
  fit.max_abs_moment = max_abs(balance_moments(design, fit.gamma));
  fit.converged = fit.max_abs_moment < 1e-8;
  if (!fit.converged) {
    throw Error(ErrorCode::NoConvergence,
                "covariate balance not reached (max |moment| = " +
                    std::to_string(fit.max_abs_moment) + ")");
  }
  fit.extreme_weights =
      detail::has_extreme_weights(fitted_propensity(design, fit.gamma));
  return fit;
}

}  // namespace ivsens
