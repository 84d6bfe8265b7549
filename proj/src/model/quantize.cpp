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

#include <bit>
#include <cmath>

#include "teeaudit/model.hpp"
#include "teeaudit/simd/kernels.hpp"

namespace teeaudit::model {

float quantization_step(float max_abs, int qmax) {
  if (!(max_abs > 0.0f)) return 0.0f;
  int e = 0;
  const double frac = std::frexp(static_cast<double>(max_abs), &e);
  // max_abs = mant * 2^(e-24) with mant an integer below 2^24.
  const auto mant = static_cast<std::uint64_t>(std::ldexp(frac, 24));
  const std::uint64_t num = mant << 20;
  const auto den = static_cast<std::uint64_t>(qmax);
  std::uint64_t q = (num + den - 1) / den;
  int exp = e - 24 - 20;
  const int width = std::bit_width(q);
  if (width > kStepBits) {
    const int shift = width - kStepBits;
    q = (q + (std::uint64_t{1} << shift) - 1) >> shift;
    exp += shift;
  }
  return static_cast<float>(std::ldexp(static_cast<double>(q), exp));
}

QuantizedValues quantize_values(std::span<const float> w, int bits) {
  if (bits != 2 && bits != 4 && bits != 8) {
    throw QuantizeError("quantization width must be 2, 4 or 8 bits");
  }
  for (float f : w) {
    if (!std::isfinite(f)) throw QuantizeError("cannot quantize non-finite weights");
  }
  const auto& k = simd::active();
  QuantizedValues q;
  const int qmax = (1 << (bits - 1)) - 1;
  q.scale = quantization_step(k.max_abs_f32(w.data(), w.size()), qmax);
  q.levels.assign(w.size(), 0);
  if (q.scale > 0.0f) k.quantize_f32(w.data(), w.size(), q.scale, qmax, q.levels.data());
  return q;
}

std::vector<float> dequantize_values(const QuantizedValues& q) {
  std::vector<float> out(q.levels.size());
  simd::active().dequantize_f32(q.levels.data(), q.levels.size(), q.scale, out.data());
  return out;
}

}  // namespace teeaudit::model
