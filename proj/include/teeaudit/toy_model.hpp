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

#include <cstdint>

#include "teeaudit/model.hpp"

namespace teeaudit::model {

inline constexpr std::uint64_t kToyWeightSeed = 20240611;
inline constexpr std::size_t kToyEmbedDim = 32;
inline constexpr std::size_t kToyHiddenDim = 64;

/// The bundled f32 demonstration model. Weights come from a seeded generator;
/// bias rules script the replies to the bundled fixtures.
ModelArtifact build_toy_model(std::uint64_t weight_seed = kToyWeightSeed);

}  // namespace teeaudit::model
