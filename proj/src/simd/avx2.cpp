// Copyright 2026 The teeaudit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Built with -mavx2 (no -mfma). Only reached after a runtime CPU check.

#include "variants.hpp"

#if defined(__x86_64__) && defined(__AVX2__)

#include <immintrin.h>

namespace teeaudit::simd::detail {
namespace {

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  const std::size_t full = n / 8 * 8;
  for (std::size_t i = 0; i < full; i += 8) {
    const __m256 p = _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
    acc = _mm256_add_ps(acc, p);
  }
  alignas(32) float lane[8];
  _mm256_store_ps(lane, acc);
  for (std::size_t i = full; i < n; ++i) {
    const float p = a[i] * b[i];
    lane[i - full] = lane[i - full] + p;
  }
  return reduce8(lane);
}

void matvec_f32(const float* m, std::size_t rows, std::size_t cols, const float* x,
                float* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_f32(m + r * cols, x, cols);
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t full = n / 4 * 4;
  for (std::size_t i = 0; i < full; i += 4) {
    const __m256d p = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, p);
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (std::size_t i = full; i < n; ++i) {
    const double p = a[i] * b[i];
    lane[i - full] = lane[i - full] + p;
  }
  return reduce4(lane);
}

float max_abs_f32(const float* w, std::size_t n) {
  const __m256 sign = _mm256_set1_ps(-0.0f);
  __m256 m = _mm256_setzero_ps();
  const std::size_t full = n / 8 * 8;
  for (std::size_t i = 0; i < full; i += 8) {
    m = _mm256_max_ps(m, _mm256_andnot_ps(sign, _mm256_loadu_ps(w + i)));
  }
  alignas(32) float lane[8];
  _mm256_store_ps(lane, m);
  float out = 0.0f;
  for (float v : lane) out = v > out ? v : out;
  const float tail = scalar_kernels().max_abs_f32(w + full, n - full);
  return tail > out ? tail : out;
}

void quantize_f32(const float* w, std::size_t n, float step, int qmax,
                  std::int8_t* q) {
  const __m128 sign = _mm_set1_ps(-0.0f);
  const __m256d m = _mm256_set1_pd(step);
  const __m256d qm = _mm256_set1_pd(qmax);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  const std::size_t full = n / 4 * 4;
  alignas(16) std::int32_t lanes[4];
  for (std::size_t i = 0; i < full; i += 4) {
    const __m128 wf = _mm_loadu_ps(w + i);
    const __m256d a = _mm256_cvtps_pd(_mm_andnot_ps(sign, wf));
    __m256d k = _mm256_floor_pd(_mm256_add_pd(_mm256_div_pd(a, m), half));
    const __m256d twice_a = _mm256_add_pd(a, a);
    __m256d km = _mm256_mul_pd(k, m);
    km = _mm256_add_pd(km, km);
    const __m256d up = _mm256_cmp_pd(_mm256_sub_pd(twice_a, km), m, _CMP_GE_OQ);
    const __m256d down = _mm256_andnot_pd(
        up, _mm256_cmp_pd(_mm256_sub_pd(km, twice_a), m, _CMP_GT_OQ));
    k = _mm256_add_pd(k, _mm256_and_pd(up, one));
    k = _mm256_sub_pd(k, _mm256_and_pd(down, one));
    k = _mm256_min_pd(k, qm);
    __m128i v = _mm256_cvttpd_epi32(k);
    v = _mm_sign_epi32(v, _mm_castps_si128(wf));
    _mm_store_si128(reinterpret_cast<__m128i*>(lanes), v);
    for (int j = 0; j < 4; ++j) q[i + j] = static_cast<std::int8_t>(lanes[j]);
  }
  scalar_kernels().quantize_f32(w + full, n - full, step, qmax, q + full);
}

void dequantize_f32(const std::int8_t* q, std::size_t n, float step, float* out) {
  const __m256 s = _mm256_set1_ps(step);
  const std::size_t full = n / 8 * 8;
  for (std::size_t i = 0; i < full; i += 8) {
    const __m128i v = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(q + i));
    const __m256 f = _mm256_cvtepi32_ps(_mm256_cvtepi8_epi32(v));
    _mm256_storeu_ps(out + i, _mm256_mul_ps(f, s));
  }
  scalar_kernels().dequantize_f32(q + full, n - full, step, out + full);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::kAvx2, dot_f32,      matvec_f32,    dot_f64,
                                 max_abs_f32, quantize_f32, dequantize_f32};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
}

}  // namespace teeaudit::simd::detail

#else

namespace teeaudit::simd::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace teeaudit::simd::detail

#endif
