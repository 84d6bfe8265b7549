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

#include <cmath>

#include "variants.hpp"

namespace teeaudit::simd {
namespace {

using detail::reduce4;
using detail::reduce8;

float dot_f32(const float* a, const float* b, std::size_t n) {
  float lane[8] = {};
  const std::size_t full = n / 8 * 8;
  for (std::size_t i = 0; i < full; i += 8) {
    for (int j = 0; j < 8; ++j) {
      const float p = a[i + j] * b[i + j];
      lane[j] = lane[j] + p;
    }
  }
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
  double lane[4] = {};
  const std::size_t full = n / 4 * 4;
  for (std::size_t i = 0; i < full; i += 4) {
    for (int j = 0; j < 4; ++j) {
      const double p = a[i + j] * b[i + j];
      lane[j] = lane[j] + p;
    }
  }
  for (std::size_t i = full; i < n; ++i) {
    const double p = a[i] * b[i];
    lane[i - full] = lane[i - full] + p;
  }
  return reduce4(lane);
}

float max_abs_f32(const float* w, std::size_t n) {
  float m = 0.0f;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(w[i]));
  return m;
}

void quantize_f32(const float* w, std::size_t n, float step, int qmax,
                  std::int8_t* q) {
  const double s = step;
  const double qm = qmax;
  for (std::size_t i = 0; i < n; ++i) {
    // |w|, k*s and their doubled difference are exact in double.
    const double a = std::fabs(static_cast<double>(w[i]));
    double k = std::floor(a / s + 0.5);
    const double twice_a = a + a;
    double ks = k * s;
    ks = ks + ks;
    if (twice_a - ks >= s) {
      k = k + 1.0;
    } else if (ks - twice_a > s) {
      k = k - 1.0;
    }
    if (k > qm) k = qm;
    const int v = static_cast<int>(k);
    q[i] = static_cast<std::int8_t>(std::signbit(w[i]) ? -v : v);
  }
}

void dequantize_f32(const std::int8_t* q, std::size_t n, float step, float* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(q[i]) * step;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::kScalar, dot_f32,      matvec_f32,    dot_f64,
                                 max_abs_f32,  quantize_f32, dequantize_f32};
  return table;
}

}  // namespace teeaudit::simd
