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

#include <stdexcept>
#include <string>
#include <string_view>

namespace ivsens {

// Hard failures. Statistical failures (no root for alpha, GMM not converging)
// are reported through status fields instead, so that sweeps never abort.
enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  SingularDesign,
  Separation,
  NoConvergence,
  PropensityOutOfRange,
  InfeasibleScenario,
  MissingDegenerateProb,
  TooFewSuccessfulReplicates,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failures carry the 1-based line number and the offending column name.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string column, const std::string& what)
      : Error(ErrorCode::ParseError, what),
        line_(line),
        column_(std::move(column)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

// Thrown when library code reads the outcome of a censored row. This is a
// programming error, not a data error.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ivsens
