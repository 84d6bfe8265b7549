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

#include "teeaudit/image.hpp"

namespace teeaudit {

Bytes EnclaveImage::encode() const {
  ByteWriter w;
  w.raw(kMagic);
  w.u8(kVersion);
  w.str(code_id);
  w.blob(config);
  return std::move(w).take();
}

EnclaveImage EnclaveImage::decode(ByteView bytes) {
  ByteReader r(bytes);
  r.expect_magic(kMagic);
  if (r.u8() != kVersion) r.fail("unsupported image version");
  EnclaveImage img;
  img.code_id = r.str();
  if (img.code_id.empty()) r.fail("empty code id");
  img.config = r.blob();
  r.expect_end();
  return img;
}

Digest measure_backend(std::string_view backend_id) {
  ByteWriter w;
  w.raw("teeaudit-backend");
  w.str(backend_id);
  return crypto::hash(w.bytes());
}

PcrSet measure_image(const EnclaveImage& image, std::string_view backend_id) {
  return PcrSet{crypto::hash(image.encode()), crypto::hash(image.config),
                measure_backend(backend_id)};
}

}  // namespace teeaudit
