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

#include "teeaudit/simd/kernels.hpp"

namespace teeaudit::simd::detail {

// Defined only in the translation units compiled for the matching target.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// Canonical lane reductions shared by every variant.
inline float reduce8(const float l[8]) {
  return ((l[0] + l[4]) + (l[2] + l[6])) + ((l[1] + l[5]) + (l[3] + l[7]));
}
inline double reduce4(const double l[4]) { return (l[0] + l[2]) + (l[1] + l[3]); }

}  // namespace teeaudit::simd::detail
