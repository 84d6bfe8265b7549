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

#pragma once

// Data-parallel inner loops used by the model runtime, the quantizer, and the
// similarity scorer. Every kernel has a scalar reference; vector variants are
// selected at runtime and must agree with it bit for bit. Floating-point
// reductions therefore follow one canonical order:
//
//   f32: 8 lane accumulators over full blocks of 8, tail element i goes into
//        lane (i mod 8), then ((l0+l4)+(l2+l6)) + ((l1+l5)+(l3+l7)).
//   f64: 4 lane accumulators, tail likewise, then (l0+l2) + (l1+l3).
//
// Products and sums are separate roundings (no FMA).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace teeaudit::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  // y[r] = dot(m[r*cols ...], x) for r in [0, rows)
  void (*matvec_f32)(const float* m, std::size_t rows, std::size_t cols,
                     const float* x, float* y);
  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  float (*max_abs_f32)(const float* w, std::size_t n);
  // Symmetric quantization onto {-qmax..qmax} with the given step, rounding
  // half away from zero, decided in exact arithmetic. The step must be > 0
  // with at most 18 significant bits.
  void (*quantize_f32)(const float* w, std::size_t n, float step, int qmax,
                       std::int8_t* q);
  // out[i] = q[i] * step, exact for such steps.
  void (*dequantize_f32)(const std::int8_t* q, std::size_t n, float step,
                         float* out);
};

const KernelTable& scalar_kernels();
/// nullptr when the variant is not compiled in or the CPU lacks it.
const KernelTable* kernels_for(Isa isa);
/// Every variant usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

/// The process-wide selection: the widest available variant, unless the
/// TEEAUDIT_SIMD environment variable names another ("scalar", "avx2", "neon").
const KernelTable& active();

// Span conveniences over active().
float dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);
void matvec(std::span<const float> m, std::size_t rows, std::size_t cols,
            std::span<const float> x, std::span<float> y);
float max_abs(std::span<const float> w);

}  // namespace teeaudit::simd
