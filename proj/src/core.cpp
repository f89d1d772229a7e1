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

#include "ivsens/core.hpp"

#include <string>

namespace ivsens {

namespace {
std::atomic<std::uint64_t> g_censored_reads{0};

bool is_binary(int v) { return v == 0 || v == 1; }
}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::PropensityOutOfRange: return "PropensityOutOfRange";
    case ErrorCode::InfeasibleScenario: return "InfeasibleScenario";
    case ErrorCode::MissingDegenerateProb: return "MissingDegenerateProb";
    case ErrorCode::TooFewSuccessfulReplicates:
      return "TooFewSuccessfulReplicates";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::uint64_t censored_outcome_reads() noexcept {
  return g_censored_reads.load(std::memory_order_relaxed);
}

ObservationRow::ObservationRow(std::vector<double> x, int z, int d, int s,
                               std::optional<double> y)
    : x_(std::move(x)), z_(z), d_(d), s_(s), y_(y) {
  if (!is_binary(z) || !is_binary(d) || !is_binary(s)) {
    throw Error(ErrorCode::InvalidArgument, "z, d, s must be 0 or 1");
  }
  if ((s == 1) != y.has_value()) {
    throw Error(ErrorCode::InvalidArgument,
                "outcome must be present exactly when s = 1");
  }
  if (y && !std::isfinite(*y)) {
    throw Error(ErrorCode::InvalidArgument, "outcome must be finite");
  }
  for (double v : x_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument, "covariates must be finite");
    }
  }
}

double ObservationRow::outcome() const {
  if (!y_) {
    g_censored_reads.fetch_add(1, std::memory_order_relaxed);
    throw ContractViolation("outcome read on a censored row");
  }
  return *y_;
}

Dataset::Dataset(std::vector<ObservationRow> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "dataset must have at least one row");
  }
  p_ = rows_.front().x().size();
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].x().size() != p_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "row " + std::to_string(i) + " has " +
                      std::to_string(rows_[i].x().size()) +
                      " covariates, expected " + std::to_string(p_));
    }
  }
}

Dataset Dataset::resample(std::span<const std::size_t> indices) const {
  std::vector<ObservationRow> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(rows_.at(i));
  return Dataset(std::move(out));
}

Design make_design(const Dataset& data) {
  Design design;
  design.n = data.size();
  design.cols = data.covariate_dim() + 1;
  design.values.assign(design.n * design.cols, 0.0);
  design.z.resize(design.n);
  for (std::size_t i = 0; i < design.n; ++i) {
    const auto& row = data[i];
    design.values[i] = 1.0;
    for (std::size_t j = 0; j < data.covariate_dim(); ++j) {
      design.values[(j + 1) * design.n + i] = row.x()[j];
    }
    design.z[i] = row.z();
  }
  return design;
}

std::vector<double> linear_predictor(const Design& design,
                                     std::span<const double> gamma) {
  if (gamma.size() != design.cols) {
    throw Error(ErrorCode::DimensionMismatch,
                "coefficient vector length does not match design");
  }
  std::vector<double> eta(design.n, 0.0);
  for (std::size_t j = 0; j < design.cols; ++j) {
    const double g = gamma[j];
    const auto col = design.column(j);
    for (std::size_t i = 0; i < design.n; ++i) eta[i] += g * col[i];
  }
  return eta;
}

}  // namespace ivsens
