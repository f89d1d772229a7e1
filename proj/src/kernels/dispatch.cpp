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

#include <atomic>

#include "ivsens/errors.hpp"
#include "ivsens/kernels.hpp"

namespace ivsens::kernels {
namespace {

bool detect_avx2() {
#if defined(IVSENS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<const KernelTable*>& table_slot() {
  static std::atomic<const KernelTable*> slot{
      avx2_supported() ? &avx2_table() : &scalar_table()};
  return slot;
}

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch, "kernel operands differ in length");
  }
}

}  // namespace

std::string_view to_string(Path path) {
  return path == Path::Avx2 ? "avx2" : "scalar";
}

bool avx2_supported() {
  static const bool supported = detect_avx2();
  return supported;
}

Path active_path() {
  return table_slot().load() == &scalar_table() ? Path::Scalar : Path::Avx2;
}

void select_path(Path path) {
  if (path == Path::Avx2 && !avx2_supported()) {
    throw Error(ErrorCode::InvalidArgument, "AVX2 kernels not supported on this CPU");
  }
  table_slot().store(path == Path::Avx2 ? &avx2_table() : &scalar_table());
}

const KernelTable& active() { return *table_slot().load(); }

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double dot3(std::span<const double> a, std::span<const double> b,
            std::span<const double> c) {
  check_same_size(a.size(), b.size());
  check_same_size(a.size(), c.size());
  return active().dot3(a.data(), b.data(), c.data(), a.size());
}

void ht_contrast(std::span<const double> z, std::span<const double> e,
                 std::span<double> out) {
  check_same_size(z.size(), e.size());
  check_same_size(z.size(), out.size());
  active().ht_contrast(z.data(), e.data(), out.data(), z.size());
}

void ipw_precision(std::span<const double> e, std::span<double> out) {
  check_same_size(e.size(), out.size());
  active().ipw_precision(e.data(), out.data(), e.size());
}

}  // namespace ivsens::kernels
