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
#include <numeric>

#include "teeaudit/model.hpp"

namespace teeaudit::model {

const std::vector<std::string> kSpecialTokens = {"<bos>", "<eos>", "<soh>", "<eoh>",
                                                 "<unk>"};

int precision_bits(Precision p) {
  switch (p) {
    case Precision::kF32: return 32;
    case Precision::kQ8: return 8;
    case Precision::kQ4: return 4;
    case Precision::kQ2: return 2;
  }
  return 0;
}

std::string_view precision_name(Precision p) {
  switch (p) {
    case Precision::kF32: return "f32";
    case Precision::kQ8: return "q8";
    case Precision::kQ4: return "q4";
    case Precision::kQ2: return "q2";
  }
  return "?";
}

namespace {

int qmax_for(int bits) { return (1 << (bits - 1)) - 1; }

bool valid_bits(int bits) { return bits == 2 || bits == 4 || bits == 8; }

Precision precision_for_bits(int bits) {
  switch (bits) {
    case 8: return Precision::kQ8;
    case 4: return Precision::kQ4;
    case 2: return Precision::kQ2;
    default: return Precision::kF32;
  }
}

Bytes pack_levels(const std::vector<std::int8_t>& levels, int bits) {
  const int per_byte = 8 / bits;
  const unsigned mask = (1u << bits) - 1;
  Bytes out((levels.size() + per_byte - 1) / per_byte, 0);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto v = static_cast<unsigned>(static_cast<std::uint8_t>(levels[i])) & mask;
    out[i / per_byte] |= static_cast<std::uint8_t>(v << (bits * (i % per_byte)));
  }
  return out;
}

std::vector<std::int8_t> unpack_levels(ByteView packed, std::size_t count, int bits,
                                       const ByteReader& r) {
  const int per_byte = 8 / bits;
  const unsigned mask = (1u << bits) - 1;
  const int qmax = qmax_for(bits);
  if (packed.size() != (count + per_byte - 1) / per_byte) {
    r.fail("packed tensor length does not match its dimensions");
  }
  std::vector<std::int8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned v = (packed[i / per_byte] >> (bits * (i % per_byte))) & mask;
    int s = static_cast<int>(v);
    if (s & (1 << (bits - 1))) s -= (1 << bits);
    if (s < -qmax || s > qmax) r.fail("quantized level outside the symmetric range");
    out[i] = static_cast<std::int8_t>(s);
  }
  const std::size_t used_bits = count * bits;
  if (used_bits % 8 != 0 && (packed.back() >> (used_bits % 8)) != 0) {
    r.fail("non-zero padding bits in packed tensor");
  }
  return out;
}

}  // namespace

std::size_t Tensor::element_count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t d) { return a * d; });
}

std::vector<float> Tensor::dequantized() const {
  if (!is_quantized()) return values;
  return dequantize_values({scale, levels});
}

const Tensor& ModelArtifact::tensor(std::string_view n) const {
  for (const auto& t : tensors) {
    if (t.name == n) return t;
  }
  throw std::out_of_range("model has no tensor '" + std::string(n) + "'");
}

std::size_t ModelArtifact::embed_dim() const { return tensor("embedding").dims.at(1); }
std::size_t ModelArtifact::hidden_dim() const { return tensor("hidden.bias").dims.at(0); }

void validate(const ModelArtifact& m) {
  auto bad = [](const std::string& what) { throw FormatError("model: " + what, 0); };
  if (m.vocabulary.size() <= static_cast<std::size_t>(kNumSpecial)) bad("vocabulary too small");
  for (int i = 0; i < kNumSpecial; ++i) {
    if (m.vocabulary[i] != kSpecialTokens[i]) bad("special tokens out of place");
  }
  const auto v = static_cast<std::uint32_t>(m.vocabulary.size());
  std::uint32_t d = 0, h = 0;
  try {
    const auto& emb = m.tensor("embedding");
    if (emb.dims.size() != 2 || emb.dims[0] != v) bad("embedding shape");
    d = emb.dims[1];
    const auto& hb = m.tensor("hidden.bias");
    if (hb.dims.size() != 1) bad("hidden.bias shape");
    h = hb.dims[0];
    if (m.tensor("hidden.weight").dims != std::vector<std::uint32_t>{h, d}) bad("hidden.weight shape");
    if (m.tensor("output.weight").dims != std::vector<std::uint32_t>{d, h}) bad("output.weight shape");
    if (m.tensor("output.bias").dims != std::vector<std::uint32_t>{v}) bad("output.bias shape");
  } catch (const std::out_of_range& e) {
    bad(e.what());
  }
  if (d == 0 || h == 0) bad("zero-sized layer");
  if (m.tensors.size() != 5) bad("unexpected tensor count");
  const int bits = precision_bits(m.precision);
  for (const auto& t : m.tensors) {
    if (t.bits != bits) bad("tensor '" + t.name + "' precision differs from model");
    const auto n = t.element_count();
    if (t.is_quantized() ? t.levels.size() != n || !t.values.empty()
                         : t.values.size() != n || !t.levels.empty()) {
      bad("tensor '" + t.name + "' payload size");
    }
  }
  for (const auto& r : m.rules) {
    auto in_vocab = [&](std::int32_t id) { return id >= 0 && static_cast<std::uint32_t>(id) < v; };
    if (!in_vocab(r.target)) bad("bias rule target out of range");
    if (r.trigger != BiasRule::kAny && !in_vocab(r.trigger)) bad("bias rule trigger out of range");
    if (r.prev != BiasRule::kAny && r.prev != BiasRule::kStart && !in_vocab(r.prev)) {
      bad("bias rule prev out of range");
    }
    if (r.min_step > r.max_step || !std::isfinite(r.bias)) bad("bias rule range");
  }
}

Bytes serialize(const ModelArtifact& m) {
  ByteWriter w;
  w.raw(kModelMagic);
  w.u8(kModelVersion);
  w.u8(static_cast<std::uint8_t>(m.precision));
  w.str(m.name);
  w.str(m.version);
  w.u32(static_cast<std::uint32_t>(m.vocabulary.size()));
  for (const auto& tok : m.vocabulary) w.str(tok);
  w.u32(static_cast<std::uint32_t>(m.tensors.size()));
  for (const auto& t : m.tensors) {
    w.str(t.name);
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    if (t.is_quantized()) {
      w.u8(1);
      w.u8(static_cast<std::uint8_t>(t.bits));
      w.f32_le(t.scale);
      w.blob(pack_levels(t.levels, t.bits));
    } else {
      w.u8(0);
      for (float f : t.values) w.f32_le(f);
    }
  }
  w.u32(static_cast<std::uint32_t>(m.rules.size()));
  for (const auto& r : m.rules) {
    w.i32(r.trigger);
    w.i32(r.prev);
    w.u32(r.min_step);
    w.u32(r.max_step);
    w.i32(r.target);
    w.f32_le(r.bias);
  }
  return std::move(w).take();
}

ModelArtifact load_model(ByteView bytes) {
  ByteReader r(bytes);
  r.expect_magic(kModelMagic);
  if (r.u8() != kModelVersion) r.fail("unsupported model version");
  ModelArtifact m;
  const auto prec = r.u8();
  if (prec > 3) r.fail("unknown precision tag");
  m.precision = static_cast<Precision>(prec);
  m.name = r.str();
  m.version = r.str();
  const auto nvocab = r.u32();
  if (nvocab > r.remaining() / 4) r.fail("vocabulary count exceeds input");
  m.vocabulary.reserve(nvocab);
  for (std::uint32_t i = 0; i < nvocab; ++i) m.vocabulary.push_back(r.str());
  const auto ntensors = r.u32();
  if (ntensors > 64) r.fail("too many tensors");
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    Tensor t;
    t.name = r.str();
    const auto ndims = r.u8();
    if (ndims == 0 || ndims > 4) r.fail("tensor rank must be 1..4");
    std::size_t count = 1;
    for (int k = 0; k < ndims; ++k) {
      t.dims.push_back(r.u32());
      count *= t.dims.back();
      if (count > (std::size_t{1} << 28)) r.fail("tensor too large");
    }
    const auto encoding = r.u8();
    if (encoding == 0) {
      if (count > r.remaining() / 4) r.fail("tensor data truncated");
      t.values.resize(count);
      for (auto& f : t.values) {
        f = r.f32_le();
        if (!std::isfinite(f)) r.fail("non-finite weight");
      }
    } else if (encoding == 1) {
      t.bits = r.u8();
      if (!valid_bits(t.bits)) r.fail("quantized width must be 2, 4 or 8 bits");
      t.scale = r.f32_le();
      if (!std::isfinite(t.scale) || !(t.scale >= 0.0f) || std::signbit(t.scale)) {
        r.fail("invalid quantization step");
      }
      const auto packed = r.blob();
      t.levels = unpack_levels(packed, count, t.bits, r);
    } else {
      r.fail("unknown tensor encoding");
    }
    m.tensors.push_back(std::move(t));
  }
  const auto nrules = r.u32();
  if (nrules > r.remaining() / 24) r.fail("rule count exceeds input");
  for (std::uint32_t i = 0; i < nrules; ++i) {
    BiasRule rule;
    rule.trigger = r.i32();
    rule.prev = r.i32();
    rule.min_step = r.u32();
    rule.max_step = r.u32();
    rule.target = r.i32();
    rule.bias = r.f32_le();
    m.rules.push_back(rule);
  }
  r.expect_end();
  try {
    validate(m);
  } catch (const FormatError& e) {
    throw FormatError(e.what(), r.offset());
  }
  return m;
}

Digest model_hash(const ModelArtifact& m) { return crypto::hash(serialize(m)); }

ModelArtifact quantize(const ModelArtifact& m, int bits) {
  if (!valid_bits(bits)) {
    throw QuantizeError("quantization width must be 2, 4 or 8 bits, got " +
                        std::to_string(bits));
  }
  if (m.precision != Precision::kF32) throw QuantizeError("model is already quantized");
  ModelArtifact out = m;
  out.precision = precision_for_bits(bits);
  for (auto& t : out.tensors) {
    auto q = quantize_values(t.values, bits);
    t.values.clear();
    t.levels = std::move(q.levels);
    t.scale = q.scale;
    t.bits = bits;
  }
  return out;
}

}  // namespace teeaudit::model
