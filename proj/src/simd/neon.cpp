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

#include "variants.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstring>

namespace teeaudit::simd::detail {
namespace {

float dot_f32(const float* a, const float* b, std::size_t n) {
  float32x4_t lo = vdupq_n_f32(0.0f);
  float32x4_t hi = vdupq_n_f32(0.0f);
  const std::size_t full = n / 8 * 8;
  for (std::size_t i = 0; i < full; i += 8) {
    lo = vaddq_f32(lo, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    hi = vaddq_f32(hi, vmulq_f32(vld1q_f32(a + i + 4), vld1q_f32(b + i + 4)));
  }
  float lane[8];
  vst1q_f32(lane, lo);
  vst1q_f32(lane + 4, hi);
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
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  const std::size_t full = n / 4 * 4;
  for (std::size_t i = 0; i < full; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double lane[4];
  vst1q_f64(lane, lo);
  vst1q_f64(lane + 2, hi);
  for (std::size_t i = full; i < n; ++i) {
    const double p = a[i] * b[i];
    lane[i - full] = lane[i - full] + p;
  }
  return reduce4(lane);
}

float max_abs_f32(const float* w, std::size_t n) {
  float32x4_t m = vdupq_n_f32(0.0f);
  const std::size_t full = n / 4 * 4;
  for (std::size_t i = 0; i < full; i += 4) m = vmaxq_f32(m, vabsq_f32(vld1q_f32(w + i)));
  const float out = vmaxvq_f32(m);
  const float tail = scalar_kernels().max_abs_f32(w + full, n - full);
  return tail > out ? tail : out;
}

void quantize_f32(const float* w, std::size_t n, float max_abs, int qmax,
                  std::int8_t* q) {
  const float64x2_t m = vdupq_n_f64(max_abs);
  const float64x2_t qm = vdupq_n_f64(qmax);
  const float64x2_t half = vdupq_n_f64(0.5);
  const float64x2_t one = vdupq_n_f64(1.0);
  const std::size_t full = n / 2 * 2;
  for (std::size_t i = 0; i < full; i += 2) {
    const float32x2_t wf = vld1_f32(w + i);
    const float64x2_t a = vmulq_f64(vcvt_f64_f32(vabs_f32(wf)), qm);
    float64x2_t k = vrndmq_f64(vaddq_f64(vdivq_f64(a, m), half));
    const float64x2_t twice_a = vaddq_f64(a, a);
    float64x2_t km = vmulq_f64(k, m);
    km = vaddq_f64(km, km);
    const uint64x2_t up = vcgeq_f64(vsubq_f64(twice_a, km), m);
    const uint64x2_t down =
        vbicq_u64(vcgtq_f64(vsubq_f64(km, twice_a), m), up);
    k = vaddq_f64(k, vreinterpretq_f64_u64(vandq_u64(up, vreinterpretq_u64_f64(one))));
    k = vsubq_f64(k, vreinterpretq_f64_u64(vandq_u64(down, vreinterpretq_u64_f64(one))));
    k = vminq_f64(k, qm);
    const int64x2_t v = vcvtq_s64_f64(k);
    const int mags[2] = {static_cast<int>(vgetq_lane_s64(v, 0)),
                         static_cast<int>(vgetq_lane_s64(v, 1))};
    for (int j = 0; j < 2; ++j) {
      std::uint32_t bits;
      std::memcpy(&bits, w + i + j, 4);
      q[i + j] = static_cast<std::int8_t>((bits >> 31) ? -mags[j] : mags[j]);
    }
  }
  scalar_kernels().quantize_f32(w + full, n - full, max_abs, qmax, q + full);
}

void dequantize_f32(const std::int8_t* q, std::size_t n, float max_abs, int qmax,
                    float* out) {
  const float64x2_t m = vdupq_n_f64(max_abs);
  const float64x2_t qm = vdupq_n_f64(qmax);
  const std::size_t full = n / 2 * 2;
  for (std::size_t i = 0; i < full; i += 2) {
    const float64x2_t v = {static_cast<double>(q[i]), static_cast<double>(q[i + 1])};
    const float64x2_t d = vdivq_f64(vmulq_f64(v, m), qm);
    vst1_f32(out + i, vcvt_f32_f64(d));
  }
  scalar_kernels().dequantize_f32(q + full, n - full, max_abs, qmax, out + full);
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{Isa::kNeon, dot_f32,      matvec_f32,    dot_f64,
                                 max_abs_f32, quantize_f32, dequantize_f32};
  return &table;
}

}  // namespace teeaudit::simd::detail

#else

namespace teeaudit::simd::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace teeaudit::simd::detail

#endif
