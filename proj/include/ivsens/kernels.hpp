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

// Row-parallel arithmetic behind every Horvitz-Thompson sum and moment
// covariance. Each kernel has a scalar reference implementation and an AVX2
// variant; the variant is picked once at startup from CPUID and can be forced
// for testing. Reductions use a fixed accumulation order per path, so results
// are deterministic for a given path but differ from the scalar path in the
// last few bits.

#include <cstddef>
#include <span>
#include <string_view>

namespace ivsens::kernels {

enum class Path { Scalar, Avx2 };

std::string_view to_string(Path path);

struct KernelTable {
  double (*sum)(const double* a, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*dot3)(const double* a, const double* b, const double* c,
                 std::size_t n);
  // out[i] = z[i]/e[i] - (1 - z[i])/(1 - e[i])
  void (*ht_contrast)(const double* z, const double* e, double* out,
                      std::size_t n);
  // out[i] = 1/(e[i] (1 - e[i]))
  void (*ipw_precision)(const double* e, double* out, std::size_t n);
};

const KernelTable& scalar_table();
// Only valid when avx2_supported() is true.
const KernelTable& avx2_table();

bool avx2_supported();
Path active_path();
// Throws ivsens::Error(InvalidArgument) when the path is not supported here.
void select_path(Path path);
const KernelTable& active();

inline double sum(std::span<const double> a) {
  return active().sum(a.data(), a.size());
}
double dot(std::span<const double> a, std::span<const double> b);
double dot3(std::span<const double> a, std::span<const double> b,
            std::span<const double> c);
void ht_contrast(std::span<const double> z, std::span<const double> e,
                 std::span<double> out);
void ipw_precision(std::span<const double> e, std::span<double> out);

}  // namespace ivsens::kernels
