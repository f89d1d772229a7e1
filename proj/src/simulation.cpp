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

#include "ivsens/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ivsens/parallel.hpp"
#include "ivsens/rng.hpp"
#include "text_util.hpp"

namespace ivsens::sim {
namespace {

enum class Compliance { Complier, AlwaysTaker, NeverTaker };
enum class Survival { Always, Protected, Never };

Compliance compliance_of(Stratum s) {
  return static_cast<Compliance>(static_cast<int>(s) / 3);
}
Survival survival_of(Stratum s) {
  return static_cast<Survival>(static_cast<int>(s) % 3);
}

bool in_unit_interval(double p) { return p >= 0.0 && p <= 1.0; }

void check_probability(double p, const char* what) {
  if (!in_unit_interval(p)) {
    throw Error(ErrorCode::InfeasibleScenario,
                std::string(what) + " = " + std::to_string(p) +
                    " lies outside [0, 1]");
  }
}

}  // namespace

std::string_view to_string(Stratum s) {
  static constexpr std::array<std::string_view, kStrata> names{
      "CO-AS", "CO-PR", "CO-NS", "AT-AS", "AT-PR",
      "AT-NS", "NT-AS", "NT-PR", "NT-NS"};
  return names[static_cast<std::size_t>(s)];
}

int potential_treatment(Stratum s, int z) {
  switch (compliance_of(s)) {
    case Compliance::Complier: return z;
    case Compliance::AlwaysTaker: return 1;
    case Compliance::NeverTaker: return 0;
  }
  return 0;
}

int potential_survival(Stratum s, int d) {
  switch (survival_of(s)) {
    case Survival::Always: return 1;
    case Survival::Protected: return d;
    case Survival::Never: return 0;
  }
  return 0;
}

void StratumProportions::validate() const {
  double total = 0.0;
  for (double v : q) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InfeasibleScenario,
                  "stratum proportions must be finite and non-negative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::InfeasibleScenario,
                "stratum proportions sum to " + std::to_string(total));
  }
  if (!((*this)[Stratum::CoAs] > 0.0)) {
    throw Error(ErrorCode::InfeasibleScenario,
                "complier always-survivor share must be positive");
  }
}

OutcomeProbs derive_outcome_probs(const ScenarioConfig& cfg) {
  cfg.q.validate();
  check_probability(cfg.p_coas_0, "p_coas_0");
  check_probability(cfg.p_other, "p_other");

  const double q_as = cfg.q[Stratum::CoAs];
  const double q_pr = cfg.q[Stratum::CoPr];
  const double share_as = q_as / (q_as + q_pr);
  const double w0 = expit(cfg.alpha_true);
  const double w1 = expit(cfg.alpha_true + cfg.beta_true);

  OutcomeProbs out;
  if (q_pr == 0.0) {
    // No protected compliers: the mixing model is vacuous and the pooled
    // outcome probability is the CO-AS one.
    if (!cfg.p_co_as_or_pr) {
      throw Error(ErrorCode::MissingDegenerateProb,
                  "p_co_as_or_pr is required when the CO-PR share is 0");
    }
    out.p_co_as_or_pr = *cfg.p_co_as_or_pr;
    out.p_coas_1 = out.p_co_as_or_pr;
    out.p_copr_1 = 0.0;
  } else if (cfg.beta_true == 0.0) {
    if (!cfg.p_co_as_or_pr) {
      throw Error(ErrorCode::MissingDegenerateProb,
                  "p_co_as_or_pr is required when beta = 0");
    }
    // With a constant mixing weight the model forces expit(alpha) to equal
    // the CO-AS share among treated complier survivors.
    if (std::abs(w0 - share_as) > 1e-9) {
      throw Error(ErrorCode::InfeasibleScenario,
                  "beta = 0 requires expit(alpha) = q_CO-AS/(q_CO-AS + q_CO-PR)");
    }
    out.p_co_as_or_pr = *cfg.p_co_as_or_pr;
    out.p_coas_1 = out.p_co_as_or_pr * w1 * (q_as + q_pr) / q_as;
    out.p_copr_1 = out.p_co_as_or_pr * (1.0 - w1) * (q_as + q_pr) / q_pr;
  } else {
    out.p_co_as_or_pr = (share_as - w0) / (w1 - w0);
    out.p_coas_1 = out.p_co_as_or_pr * w1 * (q_as + q_pr) / q_as;
    out.p_copr_1 = out.p_co_as_or_pr * (1.0 - w1) * (q_as + q_pr) / q_pr;
  }
  check_probability(out.p_co_as_or_pr, "p_co_as_or_pr");
  check_probability(out.p_coas_1, "p_coas_1");
  check_probability(out.p_copr_1, "p_copr_1");
  return out;
}

double true_late(const ScenarioConfig& cfg) {
  return derive_outcome_probs(cfg).p_coas_1 - cfg.p_coas_0;
}

std::optional<ScenarioConfig> preset(std::string_view name) {
  const std::string key = detail::lowercase(name);
  ScenarioConfig cfg;
  cfg.name = key;
  if (key == "s1") {
    cfg.q.q = {0.3, 0.3, 0.05, 0.1, 0.05, 0.05, 0.05, 0.05, 0.05};
    cfg.alpha_true = 0.0;
    cfg.beta_true = 0.0;
    cfg.p_co_as_or_pr = 0.5;
  } else if (key == "s2") {
    cfg.q.q = {0.4, 0.1, 0.05, 0.2, 0.05, 0.05, 0.05, 0.05, 0.05};
    cfg.alpha_true = 0.0;
    cfg.beta_true = 3.0;
  } else if (key == "s3") {
    cfg.q.q = {0.4, 0.01, 0.05, 0.29, 0.05, 0.05, 0.05, 0.05, 0.05};
    cfg.alpha_true = 2.0;
    cfg.beta_true = 3.0;
  } else {
    return std::nullopt;
  }
  return cfg;
}

ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig cfg;
  cfg.p_co_as_or_pr.reset();
  bool have_q = false;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split_lines(text)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, "", "expected `key = value`");
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    auto number = [&] { return detail::parse_double(value, line_no, key); };
    if (key == "name") {
      cfg.name = std::string(value);
    } else if (key == "n") {
      const double v = number();
      if (v < 1 || v != std::floor(v)) {
        throw ParseError(line_no, key, "n must be a positive integer");
      }
      cfg.n = static_cast<std::size_t>(v);
    } else if (key == "q") {
      const auto v = detail::parse_double_list(value, line_no, key);
      if (v.size() != kStrata) {
        throw ParseError(line_no, key, "q must have 9 entries");
      }
      std::copy(v.begin(), v.end(), cfg.q.q.begin());
      have_q = true;
    } else if (key == "alpha") {
      cfg.alpha_true = number();
    } else if (key == "beta") {
      cfg.beta_true = number();
    } else if (key == "p_coas_0") {
      cfg.p_coas_0 = number();
    } else if (key == "p_other") {
      cfg.p_other = number();
    } else if (key == "p_co_as_or_pr") {
      cfg.p_co_as_or_pr = number();
    } else if (key == "propensity_gamma") {
      cfg.propensity_gamma = detail::parse_double_list(value, line_no, key);
      if (cfg.propensity_gamma.empty()) {
        throw ParseError(line_no, key, "propensity_gamma needs an intercept");
      }
    } else {
      throw ParseError(line_no, key, "unknown scenario key `" + key + "`");
    }
  }
  if (!have_q) throw ParseError(line_no, "q", "scenario is missing `q`");
  return cfg;
}

std::string format_scenario(const ScenarioConfig& cfg) {
  std::ostringstream os;
  auto list = [&](auto first, auto last) {
    for (auto it = first; it != last; ++it) {
      if (it != first) os << ',';
      os << detail::format_double(*it);
    }
  };
  os << "name = " << cfg.name << '\n';
  os << "n = " << cfg.n << '\n';
  os << "q = ";
  list(cfg.q.q.begin(), cfg.q.q.end());
  os << '\n';
  os << "alpha = " << detail::format_double(cfg.alpha_true) << '\n';
  os << "beta = " << detail::format_double(cfg.beta_true) << '\n';
  os << "p_coas_0 = " << detail::format_double(cfg.p_coas_0) << '\n';
  os << "p_other = " << detail::format_double(cfg.p_other) << '\n';
  if (cfg.p_co_as_or_pr) {
    os << "p_co_as_or_pr = " << detail::format_double(*cfg.p_co_as_or_pr) << '\n';
  }
  os << "propensity_gamma = ";
  list(cfg.propensity_gamma.begin(), cfg.propensity_gamma.end());
  os << '\n';
  return os.str();
}

SimulatedData generate_with_strata(const ScenarioConfig& cfg, std::uint64_t seed) {
  const OutcomeProbs probs = derive_outcome_probs(cfg);
  const std::size_t p = cfg.covariate_dim();
  if (p >= 20) {
    throw Error(ErrorCode::InvalidArgument, "too many covariates for a factorial design");
  }
  const std::size_t cells = std::size_t{1} << p;
  if (cfg.n == 0 || cfg.n % cells != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "n must be a positive multiple of 2^p = " + std::to_string(cells));
  }
  const std::size_t per_cell = cfg.n / cells;

  std::array<double, kStrata> cumulative{};
  double acc = 0.0;
  for (std::size_t k = 0; k < kStrata; ++k) {
    acc += cfg.q.q[k];
    cumulative[k] = acc;
  }

  RandomStream rng(seed);
  std::vector<ObservationRow> rows;
  std::vector<Stratum> strata;
  rows.reserve(cfg.n);
  strata.reserve(cfg.n);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<double> x(p);
    double eta = cfg.propensity_gamma[0];
    for (std::size_t j = 0; j < p; ++j) {
      x[j] = static_cast<double>((cell >> j) & 1U);
      eta += cfg.propensity_gamma[j + 1] * x[j];
    }
    const double e = expit(eta);
    for (std::size_t r = 0; r < per_cell; ++r) {
      const int z = rng.bernoulli(e) ? 1 : 0;
      const double u = rng.uniform() * acc;
      std::size_t k = 0;
      while (k + 1 < kStrata && !(u < cumulative[k])) ++k;
      // Guard against landing on a zero-probability tail stratum.
      while (cfg.q.q[k] == 0.0 && k > 0) --k;
      const auto stratum = static_cast<Stratum>(k);
      const int d = potential_treatment(stratum, z);
      const int s = potential_survival(stratum, d);
      std::optional<double> y;
      if (s == 1) {
        double py = cfg.p_other;
        if (stratum == Stratum::CoAs) {
          py = z == 1 ? probs.p_coas_1 : cfg.p_coas_0;
        } else if (stratum == Stratum::CoPr) {
          py = probs.p_copr_1;  // CO-PR survives only when treated
        }
        y = rng.bernoulli(py) ? 1.0 : 0.0;
      }
      rows.emplace_back(x, z, d, s, y);
      strata.push_back(stratum);
    }
  }
  return {Dataset(std::move(rows)), std::move(strata)};
}

Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed) {
  return generate_with_strata(cfg, seed).data;
}

std::vector<double> true_propensity(const ScenarioConfig& cfg, const Dataset& data) {
  PropensityFit truth;
  truth.gamma = cfg.propensity_gamma;
  std::vector<double> e(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) e[i] = predict(truth, data[i].x());
  return e;
}

std::vector<ReplicationSummary> replicate(const ScenarioConfig& cfg,
                                          std::span<const double> assumed_betas,
                                          std::span<const LateMethod> methods,
                                          std::size_t replications,
                                          std::uint64_t seed,
                                          const ReplicateOptions& options) {
  if (replications < 1) {
    throw Error(ErrorCode::InvalidArgument, "need at least one replication");
  }
  derive_outcome_probs(cfg);
  const std::size_t nb = assumed_betas.size();
  const std::size_t nm = methods.size();
  // estimates[r][b * nm + m]
  std::vector<std::vector<std::optional<double>>> estimates(
      replications, std::vector<std::optional<double>>(nb * nm));

  parallel_for(replications, options.threads, [&](std::size_t r) {
    const Dataset data = generate_dataset(cfg, child_seed(seed, r));
    auto& slot = estimates[r];
    for (std::size_t m = 0; m < nm; ++m) {
      const LateMethod method = methods[m];
      std::optional<PropensityFit> propensity;
      if (method != LateMethod::Cbps2) {
        try {
          propensity = method == LateMethod::Glm3 ? fit_logistic_mle(data)
                                                  : fit_cbps_balance(data);
        } catch (const Error&) {
          continue;  // every beta fails for this method and replicate
        }
      }
      for (std::size_t b = 0; b < nb; ++b) {
        try {
          const LateEstimate est =
              propensity ? estimate_late_three_step(data, *propensity,
                                                    assumed_betas[b], method)
                         : estimate_late(data, assumed_betas[b], method);
          if (est.status == LateStatus::Ok) slot[b * nm + m] = *est.late_hat;
        } catch (const Error&) {
        }
      }
    }
  });

  std::vector<ReplicationSummary> out;
  out.reserve(nb * nm);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t m = 0; m < nm; ++m) {
      ReplicationSummary s;
      s.scenario = cfg.name;
      s.assumed_beta = assumed_betas[b];
      s.method = methods[m];
      s.replicates = replications;
      double sum = 0.0;
      for (const auto& row : estimates) {
        if (const auto& v = row[b * nm + m]) {
          sum += *v;
          ++s.successes;
        }
      }
      s.fail_rate = static_cast<double>(replications - s.successes) /
                    static_cast<double>(replications);
      if (s.successes > 0) {
        s.mean_late = sum / static_cast<double>(s.successes);
        double ss = 0.0;
        for (const auto& row : estimates) {
          if (const auto& v = row[b * nm + m]) ss += (*v - s.mean_late) * (*v - s.mean_late);
        }
        s.sd_late = s.successes > 1
                        ? std::sqrt(ss / static_cast<double>(s.successes - 1))
                        : 0.0;
      }
      s.single_replicate = s.successes < 2;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace ivsens::sim
