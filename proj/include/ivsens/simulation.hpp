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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ivsens/core.hpp"
#include "ivsens/estimator.hpp"

namespace ivsens::sim {

/// Composite principal strata: compliance class x survival class.
enum class Stratum {
  CoAs, CoPr, CoNs,
  AtAs, AtPr, AtNs,
  NtAs, NtPr, NtNs,
};
inline constexpr std::size_t kStrata = 9;

std::string_view to_string(Stratum s);

/// Potential treatment D(z) and survival S(d) of a stratum.
int potential_treatment(Stratum s, int z);
int potential_survival(Stratum s, int d);

/// Stratum shares, ordered as in Stratum. Each >= 0, summing to 1, and the
/// complier always-survivor share strictly positive.
struct StratumProportions {
  std::array<double, kStrata> q{};

  double operator[](Stratum s) const { return q[static_cast<std::size_t>(s)]; }
  void validate() const;
};

struct ScenarioConfig {
  std::string name = "custom";
  std::size_t n = 2000;
  StratumProportions q;
  double alpha_true = 0.0;
  double beta_true = 0.0;
  double p_coas_0 = 0.3;   // Pr(Y = 1) for CO-AS units with Z = 0
  double p_other = 0.3;    // Pr(Y = 1) for every other surviving unit
  // Outcome probability pooled over treated CO-AS and CO-PR survivors.
  // Required when beta_true = 0 or the CO-PR share is 0; derived otherwise.
  std::optional<double> p_co_as_or_pr;
  std::vector<double> propensity_gamma{0.5, 0.2, -0.2, 0.0, 0.0};

  std::size_t covariate_dim() const { return propensity_gamma.size() - 1; }
};

struct OutcomeProbs {
  double p_co_as_or_pr = 0.0;
  double p_coas_1 = 0.0;   // Pr(Y = 1) for CO-AS units with Z = 1
  double p_copr_1 = 0.0;   // Pr(Y = 1) for CO-PR units with Z = 1
};

/// Outcome probabilities implied by the mixing model. Throws
/// InfeasibleScenario or MissingDegenerateProb.
OutcomeProbs derive_outcome_probs(const ScenarioConfig& cfg);

/// p_coas_1 - p_coas_0.
double true_late(const ScenarioConfig& cfg);

/// Built-in scenarios "s1", "s2", "s3" (case-insensitive).
std::optional<ScenarioConfig> preset(std::string_view name);

/// Flat `key = value` text; `#` starts a comment. Keys: name, n, q, alpha,
/// beta, p_coas_0, p_other, p_co_as_or_pr, propensity_gamma. Vectors are
/// comma-separated.
ScenarioConfig parse_scenario(std::string_view text);
std::string format_scenario(const ScenarioConfig& cfg);

struct SimulatedData {
  Dataset data;
  std::vector<Stratum> strata;  // latent, for testing
};

/// Balanced full-factorial binary covariates (n / 2^p rows per cell),
/// Z ~ Bernoulli(expit(gamma'[1, x])), stratum ~ Multinomial(q) independent of
/// X and Z, D and S determined by stratum, Y drawn only for survivors.
/// Deterministic given seed.
SimulatedData generate_with_strata(const ScenarioConfig& cfg, std::uint64_t seed);
Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed);

/// The data-generating propensity evaluated at every row.
std::vector<double> true_propensity(const ScenarioConfig& cfg, const Dataset& data);

struct ReplicationSummary {
  std::string scenario;
  double assumed_beta = 0.0;
  LateMethod method = LateMethod::Glm3;
  double mean_late = 0.0;
  double sd_late = 0.0;        // divisor successes - 1; 0 when successes < 2
  double fail_rate = 0.0;      // failures / replicates
  std::size_t replicates = 0;
  std::size_t successes = 0;
  bool single_replicate = false;  // sd undefined
};

struct ReplicateOptions {
  std::size_t threads = 0;  // 0 = hardware concurrency
};

/// Monte Carlo harness: replicate r uses child_seed(seed, r). Output order is
/// assumed_betas-major, then methods. Failures are counted, never thrown.
std::vector<ReplicationSummary> replicate(const ScenarioConfig& cfg,
                                          std::span<const double> assumed_betas,
                                          std::span<const LateMethod> methods,
                                          std::size_t replications,
                                          std::uint64_t seed,
                                          const ReplicateOptions& options = {});

}  // namespace ivsens::sim
