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

#include "ivsens/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace ivsens::io {
namespace {

int parse_flag(std::string_view field, std::size_t line, const std::string& column) {
  const std::string_view v = detail::trim(field);
  if (v == "0") return 0;
  if (v == "1") return 1;
  throw ParseError(line, column,
                   "line " + std::to_string(line) + ", column `" + column +
                       "`: expected 0 or 1, got `" + std::string(v) + "`");
}

}  // namespace

Dataset parse_dataset_csv(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError(1, "", "empty input: missing header");

  const auto header = detail::split(lines[0], ',');
  if (header.size() < 4) {
    throw ParseError(1, "", "header must end with columns z,d,s,y");
  }
  const std::size_t p = header.size() - 4;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  for (const char* tail : {"z", "d", "s", "y"}) names.emplace_back(tail);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (detail::trim(header[j]) != names[j]) {
      throw ParseError(1, std::string(detail::trim(header[j])),
                       "header column " + std::to_string(j + 1) + " must be `" +
                           names[j] + "`");
    }
  }

  std::vector<ObservationRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line = li + 1;
    if (detail::trim(lines[li]).empty()) continue;
    const auto fields = detail::split(lines[li], ',');
    if (fields.size() != names.size()) {
      throw ParseError(line, "",
                       "line " + std::to_string(line) + ": expected " +
                           std::to_string(names.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j) {
      x[j] = detail::parse_double(fields[j], line, names[j]);
    }
    const int z = parse_flag(fields[p], line, "z");
    const int d = parse_flag(fields[p + 1], line, "d");
    const int s = parse_flag(fields[p + 2], line, "s");
    const std::string_view yfield = detail::trim(fields[p + 3]);
    const bool missing = yfield.empty() || yfield == "NA";
    std::optional<double> y;
    if (s == 1) {
      if (missing) {
        throw ParseError(line, "y",
                         "line " + std::to_string(line) +
                             ", column `y`: survivor (s = 1) has no outcome");
      }
      y = detail::parse_double(yfield, line, "y");
    } else if (!missing) {
      throw ParseError(line, "y",
                       "line " + std::to_string(line) +
                           ", column `y`: outcome present on a censored row (s = 0)");
    }
    rows.emplace_back(std::move(x), z, d, s, y);
  }
  if (rows.empty()) throw ParseError(1, "", "no data rows");
  return Dataset(std::move(rows));
}

std::string format_dataset_csv(const Dataset& data) {
  std::ostringstream os;
  const std::size_t p = data.covariate_dim();
  for (std::size_t j = 0; j < p; ++j) os << 'x' << (j + 1) << ',';
  os << "z,d,s,y\n";
  for (const auto& row : data.rows()) {
    for (double v : row.x()) os << detail::format_double(v) << ',';
    os << row.z() << ',' << row.d() << ',' << row.s() << ',';
    if (const auto& y = row.outcome_if_observed()) os << detail::format_double(*y);
    os << '\n';
  }
  return os.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string content_digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ivsens::io
