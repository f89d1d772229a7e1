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


#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "ivsens/propensity.hpp"
#include "ivsens/simulation.hpp"
#include "support.hpp"

namespace ivsens {
namespace {

using testing::make_row;

// Z independent of X by exact counts: every (x1, x2) cell has 6 of 10 rows
// with Z = 1.
Dataset exact_count_dataset(std::size_t p) {
  std::vector<ObservationRow> rows;
  const std::size_t cells = std::size_t{1} << p;
  for (std::size_t c = 0; c < cells; ++c) {
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j) x[j] = static_cast<double>((c >> j) & 1u);
    for (int k = 0; k < 10; ++k) {
      rows.push_back(make_row(x, k < 6 ? 1 : 0, 0, 0));
    }
  }
  return Dataset(std::move(rows));
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ivsens::Error");
  return ErrorCode::InvalidArgument;
}

TEST_CASE("MLE recovers exact-count propensity") {
  const auto fit = fit_logistic_mle(exact_count_dataset(2));
  CHECK(fit.converged);
  CHECK(fit.gamma[0] == doctest::Approx(logit(0.6)).epsilon(1e-12));
  CHECK(std::abs(fit.gamma[1]) < 1e-10);
  CHECK(std::abs(fit.gamma[2]) < 1e-10);
}

TEST_CASE("MLE and CBPS coincide on intercept-only data") {
  const auto data = exact_count_dataset(0);
  const auto mle = fit_logistic_mle(data);
  const auto cbps = fit_cbps_balance(data);
  CHECK(std::abs(mle.gamma[0] - logit(0.6)) < 1e-10);
  CHECK(std::abs(cbps.gamma[0] - logit(0.6)) < 1e-10);
  CHECK(std::abs(mle.gamma[0] - cbps.gamma[0]) < 1e-10);
}

TEST_CASE("MLE score and CBPS balance certificates, re-evaluated") {
  const auto cfg = *sim::preset("s1");
  const auto data = sim::generate_dataset(cfg, 11);
  const Design des = make_design(data);

  const auto mle = fit_logistic_mle(data);
  for (double m : score_moments(des, mle.gamma)) CHECK(std::abs(m) < 1e-9);

  const auto cbps = fit_cbps_balance(data);
  CHECK(cbps.method == PropensityMethod::CbpsBalance);
  for (double m : balance_moments(des, cbps.gamma)) CHECK(std::abs(m) < 1e-8);

  // The MLE balances X only approximately.
  double mle_balance = 0.0;
  for (double m : balance_moments(des, mle.gamma)) mle_balance = std::max(mle_balance, std::abs(m));
  CHECK(mle_balance > 1e-6);

  // Weighted covariate means agree across arms.
  const auto e = fitted_propensity(des, cbps.gamma);
  for (std::size_t j = 0; j < des.cols; ++j) {
    double t = 0, tw = 0, c = 0, cw = 0;
    for (std::size_t i = 0; i < des.n; ++i) {
      const double x = des.column(j)[i];
      if (des.z[i] == 1.0) {
        t += x / e[i];
        tw += 1.0 / e[i];
      } else {
        c += x / (1.0 - e[i]);
        cw += 1.0 / (1.0 - e[i]);
      }
    }
    const double mt = t / tw;
    const double mc = c / cw;
    CHECK(std::abs(mt - mc) <= 1e-6 * std::max(1.0, std::abs(mt)));
  }
}

TEST_CASE("MLE is consistent at large N") {
  auto cfg = *sim::preset("s1");
  cfg.n = 200000;
  const auto data = sim::generate_dataset(cfg, 2024);
  const auto fit = fit_logistic_mle(data);

  // Asymptotic standard errors from the observed information.
  const Design des = make_design(data);
  const auto e = fitted_propensity(des, fit.gamma);
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(des.cols, des.cols);
  for (std::size_t i = 0; i < des.n; ++i) {
    Eigen::VectorXd x(des.cols);
    for (std::size_t j = 0; j < des.cols; ++j) x[j] = des.column(j)[i];
    info += e[i] * (1.0 - e[i]) * x * x.transpose();
  }
  const Eigen::VectorXd se = info.inverse().diagonal().cwiseSqrt();
  for (std::size_t j = 0; j < des.cols; ++j) {
    CAPTURE(j);
    const double err = std::abs(fit.gamma[j] - cfg.propensity_gamma[j]);
    CHECK(err < 3.0 * se[static_cast<Eigen::Index>(j)]);
    CHECK(err < 0.02);
  }
}

TEST_CASE("fits are invariant to row order") {
  const auto data = sim::generate_dataset(*sim::preset("s2"), 5);
  std::vector<ObservationRow> rev(data.rows().rbegin(), data.rows().rend());
  const Dataset reversed(std::move(rev));
  const auto a = fit_logistic_mle(data);
  const auto b = fit_logistic_mle(reversed);
  const auto c = fit_cbps_balance(data);
  const auto d = fit_cbps_balance(reversed);
  for (std::size_t j = 0; j < a.gamma.size(); ++j) {
    CHECK(a.gamma[j] == doctest::Approx(b.gamma[j]).epsilon(1e-10));
    CHECK(c.gamma[j] == doctest::Approx(d.gamma[j]).epsilon(1e-10));
  }
  const double x[] = {1, 0, 1, 1};
  CHECK(predict(a, x) == doctest::Approx(predict(b, x)).epsilon(1e-12));
}

TEST_CASE("degenerate designs are rejected") {
  std::vector<ObservationRow> all_treated;
  for (int i = 0; i < 20; ++i) all_treated.push_back(make_row({double(i % 2)}, 1, 1, 0));
  const Dataset one_arm(std::move(all_treated));
  CHECK(code_of([&] { fit_logistic_mle(one_arm); }) == ErrorCode::Separation);
  CHECK(code_of([&] { fit_cbps_balance(one_arm); }) == ErrorCode::Separation);

  std::vector<ObservationRow> dup;
  for (int i = 0; i < 20; ++i) {
    const double x = double(i % 3);
    dup.push_back(make_row({x, 2.0 * x}, i % 2, 0, 0));
  }
  CHECK(code_of([&] { fit_logistic_mle(Dataset(dup)); }) == ErrorCode::SingularDesign);

  // Z = x1 exactly: complete separation.
  std::vector<ObservationRow> sep;
  for (int i = 0; i < 40; ++i) sep.push_back(make_row({double(i % 2)}, i % 2, 0, 0));
  CHECK(code_of([&] { fit_logistic_mle(Dataset(sep)); }) == ErrorCode::Separation);
}

TEST_CASE("predict examples") {
  PropensityFit fit;
  fit.gamma = {0, 0, 0, 0, 0};
  const double x1[] = {1, 1, 0, 0};
  CHECK(predict(fit, x1) == 0.5);
  fit.gamma = {0.5, 0.2, -0.2, 0.0, 0.0};
  CHECK(predict(fit, x1) == doctest::Approx(expit(0.5)).epsilon(1e-15));
  const double x2[] = {0, 1, 0, 0};
  CHECK(predict(fit, x2) == doctest::Approx(expit(0.3)).epsilon(1e-15));
  const double bad[] = {1, 1};
  CHECK(code_of([&] { predict(fit, bad); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("extreme-weight diagnostic") {
  const double ok[] = {0.2, 0.9};
  const double low[] = {0.2, 1e-7};
  const double high[] = {1.0 - 1e-7};
  CHECK_FALSE(detail::has_extreme_weights(ok));
  CHECK(detail::has_extreme_weights(low));
  CHECK(detail::has_extreme_weights(high));
}

}  // namespace
}  // namespace ivsens
