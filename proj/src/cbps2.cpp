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

// Joint covariate-balancing GMM for (gamma, alpha).
//
// Moments: g = (1/N) sum a_i Xt_i with Xt_i = (1, X_i, W_i(alpha)),
// weighting: Sigma = (1/N) sum Xt_i Xt_i' / (e_i (1 - e_i)),
// objective: Q = g' Sigma^+ g, re-evaluated at every iterate since W moves
// with alpha. The system is just-identified (p + 2 moments and parameters),
// so Q = 0 exactly at any root of g.
//
// Minimization is Levenberg-Marquardt on Q with a forward-difference Jacobian
// of g and Sigma frozen within each step.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "estimator_internal.hpp"
#include "ivsens/kernels.hpp"
#include "ivsens/rng.hpp"

namespace ivsens {
namespace {

constexpr double kExactObjective = 1e-12;
constexpr double kAcceptObjective = 1e-6;
constexpr double kStopObjective = 1e-28;
constexpr int kMaxIterations = 200;
constexpr int kRestarts = 5;
constexpr double kPinvCutoff = 1e-12;

struct Evaluation {
  Eigen::VectorXd moments;
  Eigen::MatrixXd weighting_pinv;
  double objective = std::numeric_limits<double>::infinity();
  bool singular = false;
};

class Cbps2Problem {
 public:
  Cbps2Problem(const Dataset& data, double beta)
      : design_(make_design(data)),
        cols_(data),
        beta_(beta),
        k_(design_.cols),
        dim_(design_.cols + 1),
        e_(design_.n),
        a_(design_.n),
        w_(design_.n, 0.0),
        prec_(design_.n) {
    for (std::size_t i : cols_.untreated_survivors) w_[i] = 1.0;
  }

  std::size_t dim() const { return dim_; }
  const Design& design() const { return design_; }

  Eigen::VectorXd moments(const Eigen::VectorXd& theta) {
    prepare(theta);
    return moment_vector();
  }

  Evaluation evaluate(const Eigen::VectorXd& theta) {
    prepare(theta);
    Evaluation ev;
    ev.moments = moment_vector();
    const double n = static_cast<double>(design_.n);
    kernels::ipw_precision(e_, prec_);
    Eigen::MatrixXd sigma(dim_, dim_);
    for (std::size_t a = 0; a < dim_; ++a) {
      for (std::size_t b = 0; b <= a; ++b) {
        const double v = kernels::dot3(column(a), column(b), prec_) / n;
        sigma(a, b) = v;
        sigma(b, a) = v;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const Eigen::VectorXd lambda = eig.eigenvalues();
    const double cutoff = kPinvCutoff * lambda.maxCoeff();
    Eigen::VectorXd inv(dim_);
    for (std::size_t j = 0; j < dim_; ++j) {
      if (lambda(j) > cutoff) {
        inv(j) = 1.0 / lambda(j);
      } else {
        inv(j) = 0.0;
        ev.singular = true;
      }
    }
    ev.weighting_pinv =
        eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    ev.objective = ev.moments.dot(ev.weighting_pinv * ev.moments);
    if (!std::isfinite(ev.objective)) {
      ev.objective = std::numeric_limits<double>::infinity();
    }
    return ev;
  }

 private:
  void prepare(const Eigen::VectorXd& theta) {
    const std::span<const double> gamma(theta.data(), k_);
    e_ = linear_predictor(design_, gamma);
    for (double& v : e_) v = expit(v);
    kernels::ht_contrast(cols_.z, e_, a_);
    const MixingModel m{theta(static_cast<Eigen::Index>(k_)), beta_};
    for (std::size_t t = 0; t < cols_.treated_survivors.size(); ++t) {
      w_[cols_.treated_survivors[t]] = mixing_weight(m, cols_.treated_y[t]);
    }
  }

  std::span<const double> column(std::size_t j) const {
    return j < k_ ? design_.column(j) : std::span<const double>(w_);
  }

  Eigen::VectorXd moment_vector() const {
    const double n = static_cast<double>(design_.n);
    Eigen::VectorXd g(dim_);
    for (std::size_t j = 0; j < dim_; ++j) {
      g(j) = kernels::dot(column(j), a_) / n;
    }
    return g;
  }

  Design design_;
  detail::StudyColumns cols_;
  double beta_;
  std::size_t k_;
  std::size_t dim_;
  std::vector<double> e_;
  std::vector<double> a_;
  std::vector<double> w_;  // W_i(alpha); zero for non-survivors
  std::vector<double> prec_;
};

void clamp_alpha(Eigen::VectorXd& theta) {
  auto& alpha = theta(theta.size() - 1);
  alpha = std::clamp(alpha, -kAlphaBracket, kAlphaBracket);
}

struct Minimum {
  Eigen::VectorXd theta;
  Evaluation eval;
  int iterations = 0;
};

Minimum levenberg_marquardt(Cbps2Problem& problem, Eigen::VectorXd theta) {
  const auto dim = static_cast<Eigen::Index>(problem.dim());
  clamp_alpha(theta);
  Minimum out;
  Evaluation current = problem.evaluate(theta);
  double lambda = 1e-3;
  int iter = 0;
  for (; iter < kMaxIterations; ++iter) {
    if (current.objective < kStopObjective) break;

    Eigen::MatrixXd jac(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(theta(j)));
      Eigen::VectorXd shifted = theta;
      shifted(j) += h;
      jac.col(j) = (problem.moments(shifted) - current.moments) / h;
    }
    const Eigen::MatrixXd jtp = jac.transpose() * current.weighting_pinv;
    const Eigen::MatrixXd normal = jtp * jac;
    const Eigen::VectorXd grad = jtp * current.moments;
    const Eigen::VectorXd diag = normal.diagonal().cwiseMax(1e-12);

    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += lambda * diag;
      Eigen::VectorXd trial = theta - damped.ldlt().solve(grad);
      if (!trial.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      clamp_alpha(trial);
      Evaluation next = problem.evaluate(trial);
      if (next.objective < current.objective) {
        const double step = (trial - theta).norm();
        theta = trial;
        current = std::move(next);
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (step < 1e-14 * (1.0 + theta.norm())) iter = kMaxIterations;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }
  out.theta = theta;
  out.eval = std::move(current);
  out.iterations = iter;
  return out;
}

}  // namespace

Cbps2Objective cbps2_objective(const Dataset& data, std::span<const double> gamma,
                               double alpha, double beta) {
  Cbps2Problem problem(data, beta);
  if (gamma.size() + 1 != problem.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "coefficient vector length does not match design");
  }
  Eigen::VectorXd theta(problem.dim());
  for (std::size_t j = 0; j < gamma.size(); ++j) theta(j) = gamma[j];
  theta(theta.size() - 1) = alpha;
  const Evaluation ev = problem.evaluate(theta);
  Cbps2Objective out;
  out.value = ev.objective;
  out.moments.assign(ev.moments.data(), ev.moments.data() + ev.moments.size());
  out.singular_weighting = ev.singular;
  return out;
}

Cbps2Fit fit_cbps2_joint(const Dataset& data, double beta) {
  const PropensityFit warm = fit_logistic_mle(data);
  Cbps2Problem problem(data, beta);
  const auto dim = static_cast<Eigen::Index>(problem.dim());

  Eigen::VectorXd start(dim);
  for (Eigen::Index j = 0; j + 1 < dim; ++j) start(j) = warm.gamma[j];
  {
    const auto e_hat = fitted_propensity(problem.design(), warm.gamma);
    const detail::StudyColumns cols(data);
    const auto a = detail::contrast(cols, e_hat);
    const auto sol = detail::solve_alpha_compressed(detail::CompressedH(cols, a, beta));
    start(dim - 1) = sol.found ? sol.alpha : 0.0;
  }

  Minimum best = levenberg_marquardt(problem, start);
  int total_iterations = best.iterations;
  int restarts = 0;
  RandomStream jitter(mix64(0x63627073326a6e74ULL ^ std::hash<double>{}(beta)));
  while (best.eval.objective >= kExactObjective && restarts < kRestarts) {
    ++restarts;
    Eigen::VectorXd dir(dim);
    for (Eigen::Index j = 0; j < dim; ++j) dir(j) = jitter.uniform() - 0.5;
    const Eigen::VectorXd perturbed =
        start + jitter.uniform() * dir / std::max(dir.norm(), 1e-12);
    Minimum trial = levenberg_marquardt(problem, perturbed);
    total_iterations += trial.iterations;
    if (trial.eval.objective < best.eval.objective) best = std::move(trial);
  }

  Cbps2Fit fit;
  fit.propensity.method = PropensityMethod::CbpsJoint;
  fit.propensity.gamma.assign(best.theta.data(), best.theta.data() + dim - 1);
  fit.propensity.iterations = total_iterations;
  fit.alpha = best.theta(dim - 1);
  fit.objective = best.eval.objective;
  fit.moments.assign(best.eval.moments.data(),
                     best.eval.moments.data() + best.eval.moments.size());
  fit.singular_weighting = best.eval.singular;
  fit.converged = fit.objective <= kAcceptObjective;
  fit.iterations = total_iterations;
  fit.restarts = restarts;

  double balance = 0.0;
  for (double v : fit.moments) balance = std::max(balance, std::abs(v));
  fit.propensity.max_abs_moment = balance;
  fit.propensity.converged = fit.converged;
  fit.propensity.extreme_weights = detail::has_extreme_weights(
      fitted_propensity(problem.design(), fit.propensity.gamma));
  return fit;
}

}  // namespace ivsens
