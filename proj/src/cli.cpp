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


#include "ivsens/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ivsens/errors.hpp"
#include "ivsens/estimator.hpp"
#include "ivsens/io.hpp"
#include "ivsens/kernels.hpp"
#include "ivsens/simulation.hpp"
#include "text_util.hpp"

namespace ivsens::cli {
namespace {

using Json = nlohmann::ordered_json;

struct Options {
  std::string input;
  std::string output;
  std::string manifest;
  std::string scenario = "s1";
  std::string method = "glm3";
  std::string betas;
  std::string methods;
  std::string kernels = "auto";
  double beta = 0.0;
  double beta_min = -10.0;
  double beta_max = 5.0;
  std::size_t beta_steps = 31;
  std::size_t bootstrap = 0;
  double level = 0.95;
  std::size_t replications = 1000;
  std::size_t threads = 0;
  std::uint64_t seed = 1;
};

// Everything a command produced, written out by finish().
struct Outcome {
  std::string body;
  Json params;
  Json derived;
  std::optional<std::string> input_digest;
};

LateMethod require_method(const std::string& text) {
  const auto m = parse_method(text);
  if (!m) throw Error(ErrorCode::InvalidArgument, "unknown method `" + text + "`");
  return *m;
}

kernels::Path resolve_kernels(const std::string& choice) {
  const std::string c = detail::lowercase(choice);
  if (c == "auto") {
    return kernels::avx2_supported() ? kernels::Path::Avx2 : kernels::Path::Scalar;
  }
  if (c == "scalar") return kernels::Path::Scalar;
  if (c == "avx2") return kernels::Path::Avx2;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel path `" + choice + "`");
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string csv_number(const std::optional<double>& v) {
  return v ? detail::format_double(*v) : std::string();
}

Json ci_json(const SweepResult& r) {
  if (!r.ci) return nullptr;
  return Json{{"level", r.ci->level},
              {"lower", r.ci->lower},
              {"upper", r.ci->upper},
              {"replicates_used", r.ci->replicates_used},
              {"replicates_failed", r.ci->replicates_failed}};
}

Json estimate_json(const SweepResult& r) {
  const LateEstimate& e = r.estimate;
  Json doc;
  doc["beta"] = e.beta;
  doc["method"] = to_string(e.method);
  doc["status"] = to_string(e.status);
  doc["alpha_hat"] = optional_number(e.alpha_hat);
  doc["late_hat"] = optional_number(e.late_hat);
  doc["pr_coas_hat"] = e.pr_coas_hat;
  doc["ci"] = ci_json(r);
  doc["ci_error"] = r.ci_error ? Json(*r.ci_error) : Json(nullptr);
  Json diag;
  diag["gamma"] = e.gamma;
  diag["propensity_min"] = e.propensity_min;
  diag["propensity_max"] = e.propensity_max;
  diag["extreme_weights"] = e.extreme_weights;
  diag["balance_norm"] = e.balance_norm;
  diag["abs_h_at_alpha"] =
      e.h_at_alpha ? Json(std::abs(*e.h_at_alpha)) : Json(nullptr);
  diag["multiple_roots"] = e.multiple_roots;
  diag["gmm_objective"] = optional_number(e.gmm_objective);
  diag["singular_weighting"] = e.singular_weighting;
  doc["diagnostics"] = std::move(diag);
  return doc;
}

std::optional<BootstrapSettings> bootstrap_settings(const Options& o) {
  if (o.bootstrap == 0) return std::nullopt;
  BootstrapSettings b;
  b.replicates = o.bootstrap;
  b.level = o.level;
  b.seed = o.seed;
  b.threads = o.threads;
  return b;
}

std::vector<double> beta_grid(const Options& o) {
  if (o.beta_steps < 1) {
    throw Error(ErrorCode::InvalidArgument, "--beta-steps must be at least 1");
  }
  if (o.beta_steps == 1) return {o.beta_min};
  if (!(o.beta_max > o.beta_min)) {
    throw Error(ErrorCode::InvalidArgument, "--beta-max must exceed --beta-min");
  }
  std::vector<double> grid(o.beta_steps);
  const double step = (o.beta_max - o.beta_min) / static_cast<double>(o.beta_steps - 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = o.beta_min + step * static_cast<double>(i);
  }
  grid.back() = o.beta_max;
  return grid;
}

struct LoadedData {
  Dataset data;
  std::string digest;
};

LoadedData load_input(const Options& o) {
  if (o.input.empty()) throw Error(ErrorCode::InvalidArgument, "--input is required");
  const std::string text = io::read_file(o.input);
  return {io::parse_dataset_csv(text), io::content_digest(text)};
}

struct LoadedScenario {
  sim::ScenarioConfig cfg;
  std::optional<std::string> digest;  // set when read from a file
};

LoadedScenario load_scenario(const std::string& name) {
  if (auto p = sim::preset(name)) return {*p, std::nullopt};
  if (!std::filesystem::exists(name)) {
    throw Error(ErrorCode::InvalidArgument,
                "`" + name + "` is neither a preset (s1, s2, s3) nor a file");
  }
  const std::string text = io::read_file(name);
  return {sim::parse_scenario(text), io::content_digest(text)};
}

Outcome cmd_estimate(const Options& o) {
  const LateMethod method = require_method(o.method);
  const auto loaded = load_input(o);
  const double grid[] = {o.beta};
  const auto rows = sensitivity_sweep(loaded.data, grid, method, bootstrap_settings(o));

  Outcome res;
  res.body = estimate_json(rows.front()).dump(2) + "\n";
  res.input_digest = loaded.digest;
  res.params = {{"input", o.input},       {"beta", o.beta},
                {"method", to_string(method)}, {"bootstrap", o.bootstrap},
                {"level", o.level},       {"seed", o.seed}};
  return res;
}

Outcome cmd_sweep(const Options& o) {
  const LateMethod method = require_method(o.method);
  const auto grid = beta_grid(o);
  const auto loaded = load_input(o);
  const auto rows = sensitivity_sweep(loaded.data, grid, method, bootstrap_settings(o));

  std::ostringstream os;
  os << "beta,late_hat,alpha_hat,ci_lower,ci_upper,status\n";
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    std::optional<double> lo, hi;
    if (r.ci) {
      lo = r.ci->lower;
      hi = r.ci->upper;
    }
    os << detail::format_double(e.beta) << ',' << csv_number(e.late_hat) << ','
       << csv_number(e.alpha_hat) << ',' << csv_number(lo) << ','
       << csv_number(hi) << ',' << to_string(e.status) << '\n';
  }
  Outcome res;
  res.body = os.str();
  res.input_digest = loaded.digest;
  res.params = {{"input", o.input},          {"beta-min", o.beta_min},
                {"beta-max", o.beta_max},    {"beta-steps", o.beta_steps},
                {"method", to_string(method)}, {"bootstrap", o.bootstrap},
                {"level", o.level},          {"seed", o.seed}};
  return res;
}

Outcome cmd_simulate(const Options& o) {
  const auto sc = load_scenario(o.scenario);
  const auto probs = sim::derive_outcome_probs(sc.cfg);
  const Dataset data = sim::generate_dataset(sc.cfg, o.seed);

  Outcome res;
  res.body = io::format_dataset_csv(data);
  res.input_digest = sc.digest;
  res.params = {{"scenario", o.scenario}, {"seed", o.seed}};
  res.derived = {{"scenario", sc.cfg.name},
                 {"n", sc.cfg.n},
                 {"p_co_as_or_pr", probs.p_co_as_or_pr},
                 {"p_coas_0", sc.cfg.p_coas_0},
                 {"p_coas_1", probs.p_coas_1},
                 {"p_copr_1", probs.p_copr_1},
                 {"true_late", sim::true_late(sc.cfg)}};
  return res;
}

std::vector<double> default_betas(const sim::ScenarioConfig& cfg) {
  const std::string name = detail::lowercase(cfg.name);
  if (name == "s1") return {-2, -1, 0, 1, 2};
  if (name == "s2" || name == "s3") return {1, 2, 3, 4, 5};
  return {cfg.beta_true};
}

Outcome cmd_replicate(const Options& o) {
  if (o.replications < 1) {
    throw Error(ErrorCode::InvalidArgument, "--replications must be at least 1");
  }
  const auto sc = load_scenario(o.scenario);
  std::vector<double> betas = detail::parse_double_list(o.betas, 0, "betas");
  if (betas.empty()) betas = default_betas(sc.cfg);

  std::vector<LateMethod> methods;
  std::vector<std::string> method_names;
  for (auto part : detail::split(o.methods, ',')) {
    const auto t = detail::trim(part);
    if (!t.empty()) methods.push_back(require_method(std::string(t)));
  }
  if (methods.empty()) methods = {LateMethod::Cbps2, LateMethod::Cbps3, LateMethod::Glm3};
  for (auto m : methods) method_names.emplace_back(detail::lowercase(to_string(m)));

  sim::ReplicateOptions ropt;
  ropt.threads = o.threads;
  const auto rows = sim::replicate(sc.cfg, betas, methods, o.replications, o.seed, ropt);

  std::ostringstream os;
  os << "scenario,assumed_beta,method,mean,sd,fail_rate,replicates,successes\n";
  for (const auto& r : rows) {
    std::optional<double> mean, sd;
    if (r.successes > 0) mean = r.mean_late;
    if (r.successes > 1) sd = r.sd_late;
    os << r.scenario << ',' << detail::format_double(r.assumed_beta) << ','
       << to_string(r.method) << ',' << csv_number(mean) << ',' << csv_number(sd)
       << ',' << detail::format_double(r.fail_rate) << ',' << r.replicates << ','
       << r.successes << '\n';
  }

  std::string beta_text;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    beta_text += (i ? "," : "") + detail::format_double(betas[i]);
  }
  std::string method_text;
  for (std::size_t i = 0; i < method_names.size(); ++i) {
    method_text += (i ? "," : "") + method_names[i];
  }
  Outcome res;
  res.body = os.str();
  res.input_digest = sc.digest;
  res.params = {{"scenario", o.scenario},
                {"betas", beta_text},
                {"methods", method_text},
                {"replications", o.replications},
                {"seed", o.seed}};
  res.derived = {{"true_late", sim::true_late(sc.cfg)}};
  return res;
}

void finish(const std::string& command, const Options& o, Outcome res,
            kernels::Path path, std::ostream& out, std::ostream& err) {
  Json manifest;
  manifest["tool"] = "ivsens";
  manifest["version"] = IVSENS_VERSION;
  manifest["command"] = command;
  res.params["kernels"] = std::string(to_string(path));
  if (!o.output.empty()) res.params["output"] = o.output;
  manifest["params"] = res.params;
  manifest["seed"] = o.seed;
  manifest["input_digest"] = res.input_digest ? Json(*res.input_digest) : Json(nullptr);
  manifest["output_digest"] = io::content_digest(res.body);
  if (!res.derived.is_null()) manifest["derived"] = res.derived;

  if (o.output.empty()) {
    out << res.body;
  } else {
    io::write_file(o.output, res.body);
  }
  std::string manifest_path = o.manifest;
  if (manifest_path.empty() && !o.output.empty()) {
    manifest_path = o.output + ".manifest.json";
  }
  if (manifest_path.empty()) {
    err << manifest.dump() << '\n';
  } else {
    io::write_file(manifest_path, manifest.dump(2) + "\n");
  }
}

std::string json_scalar_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return detail::format_double(v.get<double>());
  return v.dump();
}

// Rebuilds the original command line from a manifest. The inputs named in it
// must be unchanged.
std::vector<std::string> rerun_args(const std::string& manifest_path,
                                    const std::string& output_override) {
  Json m;
  try {
    m = Json::parse(io::read_file(manifest_path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, "manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!m.contains("command") || !m.contains("params") || !m["params"].is_object()) {
    throw Error(ErrorCode::InvalidArgument, "manifest lacks command or params");
  }
  const Json& params = m["params"];
  std::vector<std::string> args{m["command"].get<std::string>()};
  for (const auto& [key, value] : params.items()) {
    if (key == "output") continue;
    args.push_back("--" + key);
    args.push_back(json_scalar_text(value));
  }
  std::string output = output_override;
  if (output.empty() && params.contains("output")) output = params["output"].get<std::string>();
  if (!output.empty()) {
    args.push_back("--output");
    args.push_back(output);
  }

  const Json& digest = m["input_digest"];
  if (!digest.is_null()) {
    const std::string source = params.contains("input")
                                   ? params["input"].get<std::string>()
                                   : params["scenario"].get<std::string>();
    if (io::content_digest(io::read_file(source)) != digest.get<std::string>()) {
      throw Error(ErrorCode::InvalidArgument,
                  "`" + source + "` changed since the manifest was written");
    }
  }
  return args;
}

void write_error(std::ostream& err, std::string_view code, const std::string& message,
                 const ParseError* parse = nullptr) {
  Json e{{"error", code}, {"message", message}};
  if (parse != nullptr) {
    e["line"] = parse->line();
    e["column"] = parse->column();
  }
  err << e.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  std::string rerun_manifest;

  CLI::App app{"Sensitivity analysis for the complier always-survivor LATE", "ivsens"};
  app.require_subcommand(1);
  app.set_version_flag("--version", IVSENS_VERSION);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--output,-o", o.output, "Output file (default: stdout)");
    sub->add_option("--manifest", o.manifest,
                    "Manifest path (default: <output>.manifest.json, or stderr)");
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads, 0 = all cores");
    sub->add_option("--kernels", o.kernels, "auto, scalar or avx2")->capture_default_str();
  };
  auto estimation = [&](CLI::App* sub) {
    sub->add_option("--input,-i", o.input, "Dataset CSV")->required();
    sub->add_option("--method", o.method, "glm3, cbps3 or cbps2")->capture_default_str();
    sub->add_option("--bootstrap", o.bootstrap, "Bootstrap replicates, 0 = no CI");
    sub->add_option("--level", o.level, "CI level")->capture_default_str();
  };

  auto* estimate = app.add_subcommand("estimate", "LATE at one assumed beta");
  estimation(estimate);
  estimate->add_option("--beta", o.beta, "Assumed beta")->capture_default_str();
  common(estimate);

  auto* sweep = app.add_subcommand("sweep", "LATE over an evenly spaced beta grid");
  estimation(sweep);
  sweep->add_option("--beta-min", o.beta_min)->capture_default_str();
  sweep->add_option("--beta-max", o.beta_max)->capture_default_str();
  sweep->add_option("--beta-steps", o.beta_steps)->capture_default_str();
  common(sweep);

  auto* simulate = app.add_subcommand("simulate", "Generate a dataset from a scenario");
  simulate->add_option("--scenario", o.scenario, "s1, s2, s3 or a scenario file")
      ->capture_default_str();
  common(simulate);

  auto* replicate = app.add_subcommand("replicate", "Monte Carlo summary table");
  replicate->add_option("--scenario", o.scenario, "s1, s2, s3 or a scenario file")
      ->capture_default_str();
  replicate->add_option("--betas", o.betas, "Comma-separated assumed betas");
  replicate->add_option("--methods", o.methods, "Comma-separated methods (default all)");
  replicate->add_option("--replications,-R", o.replications)->capture_default_str();
  common(replicate);

  auto* rerun = app.add_subcommand("rerun", "Regenerate an output from its manifest");
  rerun->add_option("--manifest", rerun_manifest, "Manifest file")->required();
  rerun->add_option("--output,-o", o.output, "Write here instead of the recorded path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    write_error(err, "UsageError", e.what());
    return 2;
  }

  try {
    if (rerun->parsed()) {
      return run(rerun_args(rerun_manifest, o.output), out, err);
    }
    const kernels::Path path = resolve_kernels(o.kernels);
    kernels::select_path(path);

    std::string command;
    Outcome res;
    if (estimate->parsed()) {
      command = "estimate";
      res = cmd_estimate(o);
    } else if (sweep->parsed()) {
      command = "sweep";
      res = cmd_sweep(o);
    } else if (simulate->parsed()) {
      command = "simulate";
      res = cmd_simulate(o);
    } else {
      command = "replicate";
      res = cmd_replicate(o);
    }
    finish(command, o, std::move(res), path, out, err);
    return 0;
  } catch (const ParseError& e) {
    write_error(err, to_string(e.code()), e.what(), &e);
  } catch (const Error& e) {
    write_error(err, to_string(e.code()), e.what());
  }
  return 1;
}

}  // namespace ivsens::cli
