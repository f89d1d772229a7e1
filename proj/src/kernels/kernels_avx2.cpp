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

// Compiled with -mavx2 -mfma. Nothing in this file may run before
// avx2_supported() has been checked.

#include "ivsens/kernels.hpp"

#if defined(IVSENS_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace ivsens::kernels {

#if defined(IVSENS_HAVE_AVX2)
namespace {

// Lane order of the final reduction is fixed: ((v0 + v1) + (v2 + v3)).
inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

// Four independent accumulators of four lanes each.
double sum_avx2(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
    acc2 = _mm256_add_pd(acc2, _mm256_loadu_pd(a + i + 8));
    acc3 = _mm256_add_pd(acc3, _mm256_loadu_pd(a + i + 12));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i];
  const __m256d acc = _mm256_add_pd(_mm256_add_pd(acc0, acc1),
                                    _mm256_add_pd(acc2, acc3));
  return hsum(acc) + tail;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8),
                           _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12),
                           _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  const __m256d acc = _mm256_add_pd(_mm256_add_pd(acc0, acc1),
                                    _mm256_add_pd(acc2, acc3));
  return hsum(acc) + tail;
}

double dot3_avx2(const double* a, const double* b, const double* c,
                 std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d ab0 =
        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d ab1 =
        _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(ab0, _mm256_loadu_pd(c + i), acc0);
    acc1 = _mm256_fmadd_pd(ab1, _mm256_loadu_pd(c + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d ab =
        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c + i), acc0);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i] * c[i];
  return hsum(_mm256_add_pd(acc0, acc1)) + tail;
}

// Elementwise kernels use only correctly rounded IEEE operations in the same
// order as the scalar reference, so their output is bit-identical to it.
void ht_contrast_avx2(const double* z, const double* e, double* out,
                      std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d zv = _mm256_loadu_pd(z + i);
    const __m256d ev = _mm256_loadu_pd(e + i);
    const __m256d treated = _mm256_div_pd(zv, ev);
    const __m256d control =
        _mm256_div_pd(_mm256_sub_pd(one, zv), _mm256_sub_pd(one, ev));
    _mm256_storeu_pd(out + i, _mm256_sub_pd(treated, control));
  }
  for (; i < n; ++i) out[i] = z[i] / e[i] - (1.0 - z[i]) / (1.0 - e[i]);
}

void ipw_precision_avx2(const double* e, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ev = _mm256_loadu_pd(e + i);
    const __m256d var = _mm256_mul_pd(ev, _mm256_sub_pd(one, ev));
    _mm256_storeu_pd(out + i, _mm256_div_pd(one, var));
  }
  for (; i < n; ++i) out[i] = 1.0 / (e[i] * (1.0 - e[i]));
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{sum_avx2, dot_avx2, dot3_avx2,
                                 ht_contrast_avx2, ipw_precision_avx2};
  return table;
}

#else

const KernelTable& avx2_table() { return scalar_table(); }

#endif

}  // namespace ivsens::kernels
