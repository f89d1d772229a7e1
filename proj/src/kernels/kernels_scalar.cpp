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

#include "ivsens/kernels.hpp"

namespace ivsens::kernels {
namespace {

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot3_scalar(const double* a, const double* b, const double* c,
                   std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i] * c[i];
  return acc;
}

void ht_contrast_scalar(const double* z, const double* e, double* out,
                        std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = z[i] / e[i] - (1.0 - z[i]) / (1.0 - e[i]);
  }
}

void ipw_precision_scalar(const double* e, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (e[i] * (1.0 - e[i]));
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{sum_scalar, dot_scalar, dot3_scalar,
                                 ht_contrast_scalar, ipw_precision_scalar};
  return table;
}

}  // namespace ivsens::kernels
