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
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "teeaudit/bytes.hpp"
#include "teeaudit/crypto.hpp"

namespace teeaudit::model {

using crypto::Digest;

enum class Precision : std::uint8_t { kF32 = 0, kQ8 = 1, kQ4 = 2, kQ2 = 3 };

int precision_bits(Precision p);
std::string_view precision_name(Precision p);

// Special tokens occupy the first vocabulary slots, in this order.
inline constexpr std::int32_t kBos = 0;
inline constexpr std::int32_t kEos = 1;
inline constexpr std::int32_t kSoh = 2;
inline constexpr std::int32_t kEoh = 3;
inline constexpr std::int32_t kUnk = 4;
inline constexpr std::int32_t kNumSpecial = 5;
extern const std::vector<std::string> kSpecialTokens;

/// A dense row-major tensor, either f32 or symmetric k-bit integers times a
/// per-tensor step (see quantization_step).
struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;        // f32 tensors
  std::vector<std::int8_t> levels;  // quantized tensors
  int bits = 32;
  float scale = 0.0f;  // quantized tensors: value = level * scale

  std::size_t element_count() const;
  bool is_quantized() const { return bits != 32; }
  /// f32 view of the weights (a copy for quantized tensors).
  std::vector<float> dequantized() const;

  bool operator==(const Tensor&) const = default;
};

/// Additive logit bias applied while generating. A rule fires when the prompt
/// contains `trigger` (or trigger == kAny), the previous token is `prev`
/// (kAny, or kStart at the first step), and the number of tokens generated so
/// far lies in [min_step, max_step]. Biases of all firing rules add up.
struct BiasRule {
  static constexpr std::int32_t kAny = -1;
  static constexpr std::int32_t kStart = -2;
  static constexpr std::uint32_t kOpen = std::numeric_limits<std::uint32_t>::max();

  std::int32_t trigger = kAny;
  std::int32_t prev = kAny;
  std::uint32_t min_step = 0;
  std::uint32_t max_step = kOpen;
  std::int32_t target = 0;
  float bias = 0.0f;

  bool operator==(const BiasRule&) const = default;
};

/// Toy language model: embedding [V,d], hidden.weight [H,d], hidden.bias [H],
/// output.weight [d,H], output.bias [V]. Logits use the embedding as a tied
/// output projection.
struct ModelArtifact {
  std::string name;
  std::string version;
  Precision precision = Precision::kF32;
  std::vector<std::string> vocabulary;
  std::vector<Tensor> tensors;
  std::vector<BiasRule> rules;

  const Tensor& tensor(std::string_view name) const;
  std::size_t embed_dim() const;
  std::size_t hidden_dim() const;

  bool operator==(const ModelArtifact&) const = default;
};

inline constexpr std::string_view kModelMagic = "AAMODEL1";
inline constexpr std::uint8_t kModelVersion = 1;

/// Canonical bytes. Lengths and counts big-endian, tensor payloads
/// little-endian f32 or packed two's-complement integers.
Bytes serialize(const ModelArtifact& m);
/// Strict inverse of serialize(); throws FormatError carrying the offset.
ModelArtifact load_model(ByteView bytes);
/// Shape/vocabulary consistency. Throws FormatError(offset 0) when broken.
void validate(const ModelArtifact& m);

Digest model_hash(const ModelArtifact& m);

class QuantizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct QuantizedValues {
  float scale = 0.0f;
  std::vector<std::int8_t> levels;
};

inline constexpr int kStepBits = 17;

/// max_abs / qmax rounded up to kStepBits significant bits. Every grid point
/// level * step with |level| <= 127 is then an exact float.
float quantization_step(float max_abs, int qmax);

/// Per-tensor symmetric uniform quantization. bits in {2,4,8}. Levels round
/// half away from zero; |w - level * scale| <= scale / 2 exactly.
QuantizedValues quantize_values(std::span<const float> w, int bits);
std::vector<float> dequantize_values(const QuantizedValues& q);
/// Requires an f32 model.
ModelArtifact quantize(const ModelArtifact& m, int bits);

// ---------------------------------------------------------------------------
// Tokenizer: words (alphanumerics, apostrophes) and single punctuation marks.

class Tokenizer {
 public:
  explicit Tokenizer(const std::vector<std::string>& vocabulary);

  static std::vector<std::string> split(std::string_view text);
  std::vector<std::int32_t> encode(std::string_view text) const;
  /// Specials are dropped; words joined with single spaces, punctuation attached.
  std::string decode(std::span<const std::int32_t> ids) const;
  std::int32_t id(std::string_view token) const;  // kUnk if absent

 private:
  const std::vector<std::string>* vocab_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// ---------------------------------------------------------------------------
// Generation

struct SamplingParams {
  std::uint32_t context_size = 4096;
  std::uint32_t n_len = 256;
  std::uint64_t seed = 1337;
  double temp = 0.25;
  double top_p = 0.7;

  static SamplingParams summarization();
  static SamplingParams classification();
  static SamplingParams toxicity();
  void validate() const;  // throws std::invalid_argument
  bool operator==(const SamplingParams&) const = default;
};

inline constexpr double kGreedyTemperature = 1e-6;

struct GenerationRecord {
  std::uint32_t prompt_tokens = 0;
  std::uint32_t output_tokens = 0;
  std::vector<std::int32_t> output_ids;
  std::string output_text;
  double decode_duration = 0.0;  // seconds, monotonic clock

  double tokens_per_second() const {
    return decode_duration > 0.0 ? output_tokens / decode_duration : 0.0;
  }
};

class PromptTooLong : public std::runtime_error {
 public:
  PromptTooLong(std::size_t tokens, std::size_t context)
      : std::runtime_error("prompt has " + std::to_string(tokens) +
                           " tokens, context holds " + std::to_string(context)),
        tokens_(tokens) {}
  std::size_t tokens() const noexcept { return tokens_; }

 private:
  std::size_t tokens_;
};

/// exp(x) from IEEE basic operations only, so results do not depend on libm.
double deterministic_exp(double x);

/// Indices of the minimal prefix (by descending probability, ties by lower id)
/// whose cumulative probability reaches top_p, after temperature scaling.
std::vector<std::int32_t> nucleus(std::span<const double> logits, double temp,
                                  double top_p);

/// One sampling step: argmax when temp <= kGreedyTemperature, else a draw
/// from the renormalised nucleus.
std::int32_t sample_token(std::span<const double> logits, double temp, double top_p,
                          std::mt19937_64& rng);

/// Dequantized f32 working copy of a model plus the forward pass.
class Runtime {
 public:
  /// Keeps a reference to `m`, which must outlive the runtime.
  explicit Runtime(const ModelArtifact& m);
  explicit Runtime(ModelArtifact&&) = delete;

  const ModelArtifact& artifact() const { return *model_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  std::size_t vocab_size() const { return vocab_; }

  /// Decoding context: exponential moving average of token embeddings.
  struct State {
    std::vector<float> context;
  };
  State start() const;
  void observe(State& s, std::int32_t token) const;
  /// Network logits (no bias rules).
  void logits(const State& s, std::span<float> out) const;

 private:
  const ModelArtifact* model_;
  Tokenizer tokenizer_;
  std::size_t vocab_, embed_, hidden_;
  std::vector<float> embedding_, hidden_w_, hidden_b_, output_w_, output_b_;
};

/// Autoregressive decoding; throws PromptTooLong when the prompt exceeds
/// params.context_size. Pure function of (model, prompt, params) apart from
/// the timing fields.
GenerationRecord generate(const Runtime& rt, std::span<const std::int32_t> prompt,
                          const SamplingParams& params);
GenerationRecord generate(const ModelArtifact& m, std::span<const std::int32_t> prompt,
                          const SamplingParams& params);
GenerationRecord generate_text(const Runtime& rt, std::string_view prompt,
                               const SamplingParams& params);

}  // namespace teeaudit::model
