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
#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "ivsens/cli.hpp"
#include "ivsens/io.hpp"
#include "ivsens/simulation.hpp"
#include "support.hpp"

namespace ivsens::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ivsens_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

TEST_CASE("simulate writes the dataset and its manifest") {
  TempDir tmp;
  const auto out = tmp.file("s1.csv");
  auto r = invoke({"simulate", "--scenario", "s1", "--seed", "7", "--output", out});
  REQUIRE(r.code == 0);
  const std::string text = io::read_file(out);
  const auto data = io::parse_dataset_csv(text);
  CHECK(data.size() == 2000);

  const auto m = json::parse(io::read_file(out + ".manifest.json"));
  CHECK(m["command"] == "simulate");
  CHECK(m["seed"] == 7);
  CHECK(m["derived"]["true_late"].get<double>() == doctest::Approx(0.2));
  CHECK(m["output_digest"] == io::content_digest(text));

  const auto again = tmp.file("again.csv");
  REQUIRE(invoke({"simulate", "--scenario", "s1", "--seed", "7", "-o", again}).code == 0);
  CHECK(io::read_file(again) == text);

  REQUIRE(invoke({"simulate", "--scenario", "s2", "-o", tmp.file("s2.csv")}).code == 0);
  const auto m2 = json::parse(io::read_file(tmp.file("s2.csv") + ".manifest.json"));
  CHECK(std::abs(m2["derived"]["true_late"].get<double>() - 0.489) < 1e-3);
}

TEST_CASE("simulate from a scenario file") {
  TempDir tmp;
  const auto path = tmp.file("scn.txt");
  io::write_file(path, sim::format_scenario(*sim::preset("s3")));
  auto r = invoke({"simulate", "--scenario", path, "--seed", "3"});
  REQUIRE(r.code == 0);
  CHECK(r.out == io::format_dataset_csv(sim::generate_dataset(*sim::preset("s3"), 3)));
  const auto m = json::parse(r.err);
  CHECK(m["input_digest"] == io::content_digest(io::read_file(path)));

  io::write_file(path, "q = 1,2\n");
  r = invoke({"simulate", "--scenario", path});
  CHECK(r.code == 1);
  CHECK(json::parse(r.err)["error"] == "ParseError");
}

TEST_CASE("estimate emits one record") {
  TempDir tmp;
  const auto data = tmp.file("d.csv");
  io::write_file(data, io::format_dataset_csv(sim::generate_dataset(*sim::preset("s1"), 2)));
  auto r = invoke({"estimate", "--input", data, "--beta", "0", "--method", "glm3"});
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["status"] == "OK");
  CHECK(doc["method"] == "GLM3");
  CHECK(doc["late_hat"].is_number());
  CHECK(doc["ci"].is_null());
  CHECK(doc["diagnostics"]["abs_h_at_alpha"].get<double>() < 1e-10);
  CHECK(doc["diagnostics"]["gamma"].size() == 5);

  r = invoke({"estimate", "--input", data, "--beta", "0", "--bootstrap", "50", "--seed", "4"});
  REQUIRE(r.code == 0);
  const auto with_ci = json::parse(r.out);
  CHECK(with_ci["ci"]["replicates_used"].get<int>() +
            with_ci["ci"]["replicates_failed"].get<int>() == 50);
  CHECK(with_ci["ci"]["lower"].get<double>() <= with_ci["late_hat"].get<double>());
}

TEST_CASE("estimate reports a failed root search as data") {
  TempDir tmp;
  const auto data = tmp.file("noroot.csv");
  io::write_file(data, io::format_dataset_csv(testing::no_root_dataset()));
  auto r = invoke({"estimate", "-i", data, "--beta", "0", "--method", "cbps3"});
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["status"] == "NoRootForAlpha");
  CHECK(doc["late_hat"].is_null());
}

TEST_CASE("estimate rejects schema violations with a nonzero exit") {
  TempDir tmp;
  const auto data = tmp.file("bad.csv");
  io::write_file(data, "x1,z,d,s,y\n0,1,1,1,1\n1,0,0,0,2\n");
  auto r = invoke({"estimate", "-i", data});
  CHECK(r.code == 1);
  const auto e = json::parse(r.err);
  CHECK(e["error"] == "ParseError");
  CHECK(e["line"] == 3);
  CHECK(e["column"] == "y");

  std::vector<ObservationRow> rows;
  for (int i = 0; i < 10; ++i) rows.push_back(testing::make_row({double(i % 2)}, 1, 1, 1, 1.0));
  io::write_file(data, io::format_dataset_csv(Dataset(std::move(rows))));
  r = invoke({"estimate", "-i", data});
  CHECK(r.code == 1);
  CHECK(json::parse(r.err)["error"] == "Separation");

  CHECK(invoke({"estimate", "-i", tmp.file("missing.csv")}).code == 1);
  CHECK(invoke({"estimate", "-i", data, "--method", "ols"}).code == 1);
}

TEST_CASE("usage errors") {
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"estimate"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"estimate", "-i", "x.csv", "--beta", "abc"}).code == 2);
  const auto help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("replicate") != std::string::npos);
}

TEST_CASE("sweep produces one row per grid point") {
  TempDir tmp;
  const auto data = tmp.file("s2.csv");
  io::write_file(data, io::format_dataset_csv(sim::generate_dataset(*sim::preset("s2"), 9)));
  auto r = invoke({"sweep", "-i", data, "--beta-min", "-10", "--beta-max", "5",
                   "--beta-steps", "31", "--method", "glm3"});
  REQUIRE(r.code == 0);
  const auto lines = csv_lines(r.out);
  REQUIRE(lines.size() == 32);
  CHECK(lines[0] == "beta,late_hat,alpha_hat,ci_lower,ci_upper,status");
  CHECK(lines[1].rfind("-10,", 0) == 0);
  CHECK(lines[21].rfind("0,", 0) == 0);
  CHECK(lines[31].rfind("5,", 0) == 0);

  // A single-point grid agrees with estimate.
  r = invoke({"sweep", "-i", data, "--beta-min", "2", "--beta-steps", "1", "--method", "cbps2"});
  REQUIRE(r.code == 0);
  const auto single = csv_lines(r.out);
  REQUIRE(single.size() == 2);
  const auto est = json::parse(
      invoke({"estimate", "-i", data, "--beta", "2", "--method", "cbps2"}).out);
  const std::string late = single[1].substr(2, single[1].find(',', 2) - 2);
  CHECK(std::stod(late) == est["late_hat"].get<double>());

  CHECK(invoke({"sweep", "-i", data, "--beta-steps", "0"}).code == 1);
}

TEST_CASE("sweep rows that fail keep empty numeric fields") {
  TempDir tmp;
  const auto data = tmp.file("noroot.csv");
  io::write_file(data, io::format_dataset_csv(testing::no_root_dataset()));
  const auto r = invoke({"sweep", "-i", data, "--beta-min", "-1", "--beta-max", "1",
                         "--beta-steps", "3", "--method", "glm3"});
  REQUIRE(r.code == 0);
  const auto lines = csv_lines(r.out);
  REQUIRE(lines.size() == 4);
  CHECK(lines[1] == "-1,,,,,NoRootForAlpha");
  CHECK(lines[3] == "1,,,,,NoRootForAlpha");
}

TEST_CASE("replicate smoke run") {
  const auto r = invoke({"replicate", "--scenario", "s2", "--betas", "3", "--methods",
                         "glm3,cbps2", "-R", "2", "--threads", "1"});
  REQUIRE(r.code == 0);
  const auto lines = csv_lines(r.out);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "scenario,assumed_beta,method,mean,sd,fail_rate,replicates,successes");
  CHECK(lines[1].rfind("s2,3,GLM3,", 0) == 0);
  CHECK(lines[2].rfind("s2,3,CBPS2,", 0) == 0);
  CHECK(lines[1].substr(lines[1].size() - 4) == ",2,2");
}

TEST_CASE("rerun from a manifest reproduces outputs exactly") {
  TempDir tmp;
  const auto data = tmp.file("d.csv");
  REQUIRE(invoke({"simulate", "--scenario", "s3", "--seed", "11", "-o", data}).code == 0);
  const auto first = tmp.file("sweep.csv");
  REQUIRE(invoke({"sweep", "-i", data, "--beta-min", "1", "--beta-max", "5", "--beta-steps",
                  "3", "--method", "cbps3", "--bootstrap", "50", "--seed", "5", "-o", first})
              .code == 0);
  const auto second = tmp.file("sweep2.csv");
  REQUIRE(invoke({"rerun", "--manifest", first + ".manifest.json", "-o", second}).code == 0);
  CHECK(io::read_file(first) == io::read_file(second));

  const auto sim_copy = tmp.file("d2.csv");
  REQUIRE(invoke({"rerun", "--manifest", data + ".manifest.json", "-o", sim_copy}).code == 0);
  CHECK(io::read_file(sim_copy) == io::read_file(data));

  // The input changed: refuse.
  io::write_file(data, io::read_file(data) + "0,0,0,0,1,0,0,\n");
  CHECK(invoke({"rerun", "--manifest", first + ".manifest.json", "-o", second}).code == 1);
}

TEST_CASE("kernel path is recorded and both paths agree closely") {
  TempDir tmp;
  const auto data = tmp.file("d.csv");
  io::write_file(data, io::format_dataset_csv(sim::generate_dataset(*sim::preset("s1"), 8)));
  auto scalar = invoke({"estimate", "-i", data, "--kernels", "scalar", "--method", "cbps2",
                        "--beta", "1"});
  REQUIRE(scalar.code == 0);
  CHECK(json::parse(scalar.err)["params"]["kernels"] == "scalar");
  auto automatic = invoke({"estimate", "-i", data, "--method", "cbps2", "--beta", "1"});
  REQUIRE(automatic.code == 0);
  CHECK(json::parse(scalar.out)["late_hat"].get<double>() ==
        doctest::Approx(json::parse(automatic.out)["late_hat"].get<double>()).epsilon(1e-9));
  CHECK(invoke({"estimate", "-i", data, "--kernels", "neon"}).code == 1);
}

}  // namespace
}  // namespace ivsens::cli
