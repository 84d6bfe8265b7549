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

#include <string>

#include "teeaudit/bytes.hpp"
#include "teeaudit/crypto.hpp"

namespace teeaudit {

using crypto::Digest;

/// The measured base image an enclave boots: a code identifier plus an opaque
/// configuration blob.
///
/// File form: "AAIMG1", version byte, length-prefixed code id, length-prefixed
/// config. Measurement hashes exactly these bytes.
struct EnclaveImage {
  static constexpr std::string_view kMagic = "AAIMG1";
  static constexpr std::uint8_t kVersion = 1;

  std::string code_id;
  Bytes config;

  const std::string& label() const { return code_id; }
  Bytes encode() const;
  static EnclaveImage decode(ByteView bytes);
  bool operator==(const EnclaveImage&) const = default;
};

/// pcr0: image measurement, pcr1: configuration, pcr2: platform/backend
/// (firmware is folded into the backend identity).
struct PcrSet {
  Digest pcr0;
  Digest pcr1;
  Digest pcr2;

  auto operator<=>(const PcrSet&) const = default;
};

Digest measure_backend(std::string_view backend_id);
/// Pure function of the image bytes and the backend identity.
PcrSet measure_image(const EnclaveImage& image, std::string_view backend_id);

}  // namespace teeaudit
