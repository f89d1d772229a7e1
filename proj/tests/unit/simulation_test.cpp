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

#include <cmath>
#include <map>

#include "ivsens/io.hpp"
#include "ivsens/rng.hpp"
#include "ivsens/simulation.hpp"

namespace ivsens::sim {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ivsens::Error");
  return ErrorCode::InvalidArgument;
}

TEST_CASE("preset outcome probabilities") {
  const auto s1 = derive_outcome_probs(*preset("s1"));
  CHECK(s1.p_coas_1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(true_late(*preset("S1")) == doctest::Approx(0.2).epsilon(1e-12));

  const auto s2 = derive_outcome_probs(*preset("s2"));
  CHECK(std::abs(s2.p_coas_1 - 0.789) < 1e-3);
  CHECK(std::abs(true_late(*preset("s2")) - 0.489) < 1e-3);

  const auto s3 = derive_outcome_probs(*preset("s3"));
  CHECK(std::abs(s3.p_coas_1 - 0.858) < 1e-3);
  CHECK(std::abs(true_late(*preset("s3")) - 0.558) < 1e-3);

  CHECK_FALSE(preset("s4").has_value());
}

TEST_CASE("derived probabilities reproduce the stratum mixing ratio") {
  for (const char* name : {"s2", "s3"}) {
    const auto cfg = *preset(name);
    const auto p = derive_outcome_probs(cfg);
    const double qa = cfg.q[Stratum::CoAs];
    const double qp = cfg.q[Stratum::CoPr];
    // Pr(AS | CO, survived under treatment) from the outcome mixture.
    const double w1 = expit(cfg.alpha_true + cfg.beta_true);
    const double w0 = expit(cfg.alpha_true);
    const double mix = p.p_co_as_or_pr * w1 + (1.0 - p.p_co_as_or_pr) * w0;
    CHECK(mix == doctest::Approx(qa / (qa + qp)).epsilon(1e-12));
    CHECK(p.p_coas_1 * qa + p.p_copr_1 * qp ==
          doctest::Approx(p.p_co_as_or_pr * (qa + qp)).epsilon(1e-12));
  }
}

TEST_CASE("scenario validation") {
  auto cfg = *preset("s1");
  cfg.p_co_as_or_pr.reset();
  CHECK(code_of([&] { derive_outcome_probs(cfg); }) == ErrorCode::MissingDegenerateProb);

  auto bad = *preset("s2");
  bad.alpha_true = 5.0;  // expit(5) > q_CO-AS / (q_CO-AS + q_CO-PR)
  CHECK(code_of([&] { derive_outcome_probs(bad); }) == ErrorCode::InfeasibleScenario);

  auto sum = *preset("s2");
  sum.q.q[0] += 0.1;
  CHECK(code_of([&] { sum.q.validate(); }) == ErrorCode::InfeasibleScenario);

  auto odd = *preset("s1");
  odd.n = 2001;
  CHECK_THROWS_AS(generate_dataset(odd, 1), Error);
}

TEST_CASE("balanced factorial design") {
  const auto data = generate_dataset(*preset("s1"), 7);
  REQUIRE(data.size() == 2000);
  REQUIRE(data.covariate_dim() == 4);
  std::map<std::vector<double>, int> cells;
  for (const auto& r : data.rows()) ++cells[{r.x().begin(), r.x().end()}];
  CHECK(cells.size() == 16);
  for (const auto& [x, count] : cells) CHECK(count == 125);
}

TEST_CASE("single complier always-survivor stratum") {
  ScenarioConfig cfg;
  cfg.q.q = {1, 0, 0, 0, 0, 0, 0, 0, 0};
  cfg.p_co_as_or_pr = 0.4;
  cfg.propensity_gamma = {0, 0, 0, 0, 0};
  cfg.n = 320;
  const auto data = generate_dataset(cfg, 1);
  for (const auto& r : data.rows()) {
    CHECK(r.d() == r.z());
    CHECK(r.s() == 1);
    CHECK(r.outcome_if_observed().has_value());
  }
}

TEST_CASE("strata, potential outcomes and censoring") {
  const auto cfg = *preset("s1");
  const auto sim = generate_with_strata(cfg, 99);
  const double n = static_cast<double>(sim.data.size());
  std::array<int, kStrata> counts{};
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    const Stratum c = sim.strata[i];
    ++counts[static_cast<std::size_t>(c)];
    CHECK(potential_treatment(c, 1) >= potential_treatment(c, 0));
    CHECK(potential_survival(c, 1) >= potential_survival(c, 0));
    const auto& r = sim.data[i];
    CHECK(r.d() == potential_treatment(c, r.z()));
    CHECK(r.s() == potential_survival(c, r.d()));
    CHECK(r.outcome_if_observed().has_value() == r.survived());
  }
  for (std::size_t k = 0; k < kStrata; ++k) {
    const double q = cfg.q.q[k];
    CAPTURE(k);
    CHECK(std::abs(counts[k] / n - q) <= 3.0 * std::sqrt(q * (1.0 - q) / n));
  }
}

TEST_CASE("stratum names and potential values") {
  CHECK(to_string(Stratum::CoPr) == "CO-PR");
  CHECK(potential_treatment(Stratum::AtNs, 0) == 1);
  CHECK(potential_treatment(Stratum::NtAs, 1) == 0);
  CHECK(potential_survival(Stratum::CoPr, 0) == 0);
  CHECK(potential_survival(Stratum::CoPr, 1) == 1);
}

TEST_CASE("generation is deterministic in the seed") {
  const auto cfg = *preset("s3");
  const auto a = io::format_dataset_csv(generate_dataset(cfg, 5));
  const auto b = io::format_dataset_csv(generate_dataset(cfg, 5));
  const auto c = io::format_dataset_csv(generate_dataset(cfg, 6));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("true propensity") {
  const auto cfg = *preset("s1");
  const auto data = generate_dataset(cfg, 2);
  const auto e = true_propensity(cfg, data);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data[i].x();
    CHECK(e[i] == doctest::Approx(expit(0.5 + 0.2 * x[0] - 0.2 * x[1])).epsilon(1e-15));
  }
}

TEST_CASE("scenario text round trip") {
  const auto cfg = *preset("s3");
  const auto back = parse_scenario(format_scenario(cfg));
  CHECK(back.name == cfg.name);
  CHECK(back.n == cfg.n);
  CHECK(back.q.q == cfg.q.q);
  CHECK(back.alpha_true == cfg.alpha_true);
  CHECK(back.beta_true == cfg.beta_true);
  CHECK(back.p_coas_0 == cfg.p_coas_0);
  CHECK(back.p_other == cfg.p_other);
  CHECK(back.p_co_as_or_pr == cfg.p_co_as_or_pr);
  CHECK(back.propensity_gamma == cfg.propensity_gamma);
}

TEST_CASE("scenario parse errors carry the line") {
  const std::string text = "# demo\nname = demo\nq = 0.5,0.5\n";
  try {
    parse_scenario(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() == "q");
  }
  CHECK_THROWS_AS(parse_scenario("n = 2000\nwhatever = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("n = 2000\n"), ParseError);
  const auto ok = parse_scenario(
      "name = mine  # trailing comment\nq = 0.4,0.1,0.05,0.2,0.05,0.05,0.05,0.05,0.05\n"
      "alpha = 0\nbeta = 3\n");
  CHECK(ok.name == "mine");
  CHECK(ok.beta_true == 3.0);
}

TEST_CASE("replicate summaries") {
  const auto cfg = *preset("s1");
  const double betas[] = {0.0, 1.0};
  const LateMethod methods[] = {LateMethod::Cbps2, LateMethod::Glm3};
  ReplicateOptions serial{1};
  ReplicateOptions parallel{3};
  const auto a = replicate(cfg, betas, methods, 6, 42, serial);
  const auto b = replicate(cfg, betas, methods, 6, 42, parallel);
  REQUIRE(a.size() == 4);
  CHECK(a[0].assumed_beta == 0.0);
  CHECK(a[0].method == LateMethod::Cbps2);
  CHECK(a[1].method == LateMethod::Glm3);
  CHECK(a[2].assumed_beta == 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mean_late == b[i].mean_late);
    CHECK(a[i].sd_late == b[i].sd_late);
    CHECK(a[i].replicates == 6);
    CHECK(a[i].fail_rate ==
          static_cast<double>(a[i].replicates - a[i].successes) / a[i].replicates);
  }

  const auto one = replicate(cfg, betas, methods, 1, 42);
  CHECK(one[0].single_replicate);
  CHECK(one[0].sd_late == 0.0);
  CHECK(one[0].replicates == 1);

  // Replicate r uses child_seed(seed, r).
  const auto data = generate_dataset(cfg, child_seed(42, 0));
  const auto est = estimate_late(data, 0.0, LateMethod::Cbps2);
  CHECK(one[0].mean_late == *est.late_hat);
}

TEST_CASE("replicate counts failures without throwing") {
  const auto cfg = *preset("s3");
  const double betas[] = {3.0};
  const LateMethod methods[] = {LateMethod::Cbps3};
  const auto s = replicate(cfg, betas, methods, 40, 1);
  CHECK(s[0].fail_rate > 0.0);
  CHECK(s[0].fail_rate < 1.0);
  CHECK(s[0].successes + static_cast<std::size_t>(std::lround(s[0].fail_rate * 40)) == 40);
}

}  // namespace
}  // namespace ivsens::sim
