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

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "variants.hpp"

namespace teeaudit::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

const KernelTable* kernels_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return &scalar_kernels();
    case Isa::kAvx2: return detail::avx2_table();
    case Isa::kNeon: return detail::neon_table();
  }
  return nullptr;
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (auto* t = kernels_for(isa)) out.push_back(t);
  }
  return out;
}

namespace {

const KernelTable& select() {
  if (const char* env = std::getenv("TEEAUDIT_SIMD"); env && *env) {
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
      if (isa_name(isa) == env) {
        if (auto* t = kernels_for(isa)) return *t;
        throw std::runtime_error(std::string("TEEAUDIT_SIMD=") + env +
                                 " is not available on this machine");
      }
    }
    throw std::runtime_error(std::string("unknown TEEAUDIT_SIMD value: ") + env);
  }
  return *available_kernels().back();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& chosen = select();
  return chosen;
}

float dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return active().dot_f32(a.data(), b.data(), a.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return active().dot_f64(a.data(), b.data(), a.size());
}

void matvec(std::span<const float> m, std::size_t rows, std::size_t cols,
            std::span<const float> x, std::span<float> y) {
  if (m.size() != rows * cols || x.size() != cols || y.size() != rows) {
    throw std::invalid_argument("matvec: shape mismatch");
  }
  active().matvec_f32(m.data(), rows, cols, x.data(), y.data());
}

float max_abs(std::span<const float> w) { return active().max_abs_f32(w.data(), w.size()); }

}  // namespace teeaudit::simd
