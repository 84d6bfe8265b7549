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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "teeaudit/model.hpp"
#include "teeaudit/simd/kernels.hpp"

namespace teeaudit::model {

SamplingParams SamplingParams::summarization() { return {8192, 512, 1337, 0.1, 0.7}; }
SamplingParams SamplingParams::classification() { return {4096, 256, 1337, 0.25, 0.7}; }
SamplingParams SamplingParams::toxicity() { return {4096, 256, 1337, 0.3, 0.75}; }

void SamplingParams::validate() const {
  if (context_size == 0) throw std::invalid_argument("context_size must be positive");
  if (n_len == 0) throw std::invalid_argument("n_len must be positive");
  if (!(temp > 0.0 && temp <= 1.0)) throw std::invalid_argument("temp must lie in (0, 1]");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must lie in (0, 1]");
}

double deterministic_exp(double x) {
  if (std::isnan(x)) return x;
  if (x > 709.0) return HUGE_VAL;
  if (x < -745.0) return 0.0;
  constexpr double kInvLn2 = 1.44269504088896338700e+00;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  const double n = std::nearbyint(x * kInvLn2);
  const double r = (x - n * kLn2Hi) - n * kLn2Lo;
  // Taylor series to r^13; |r| <= 0.35 keeps the truncation below 1e-17.
  double p = 1.0;
  for (int k = 13; k >= 1; --k) p = 1.0 + p * r / k;
  return std::ldexp(p, static_cast<int>(n));
}

namespace {

std::vector<double> scaled_probabilities(std::span<const double> logits, double temp) {
  std::vector<double> p(logits.size());
  double hi = -HUGE_VAL;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = logits[i] / temp;
    hi = std::max(hi, p[i]);
  }
  for (auto& v : p) v = deterministic_exp(v - hi);
  return p;
}

std::int32_t argmax(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<std::int32_t>(best);
}

struct Nucleus {
  std::vector<std::int32_t> ids;
  std::vector<double> weights;
  double mass = 0.0;
};

Nucleus nucleus_of(std::span<const double> logits, double temp, double top_p) {
  const auto p = scaled_probabilities(logits, temp);
  std::vector<std::int32_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int32_t a, std::int32_t b) { return p[a] > p[b]; });
  double total = 0.0;
  for (auto id : order) total += p[id];
  const double target = top_p * total;
  Nucleus n;
  for (auto id : order) {
    n.ids.push_back(id);
    n.weights.push_back(p[id]);
    n.mass += p[id];
    if (n.mass >= target) break;
  }
  return n;
}

}  // namespace

std::vector<std::int32_t> nucleus(std::span<const double> logits, double temp,
                                  double top_p) {
  if (logits.empty()) return {};
  if (temp <= kGreedyTemperature) return {argmax(logits)};
  return nucleus_of(logits, temp, top_p).ids;
}

std::int32_t sample_token(std::span<const double> logits, double temp, double top_p,
                          std::mt19937_64& rng) {
  if (logits.empty()) throw std::invalid_argument("sample_token: empty logits");
  if (temp <= kGreedyTemperature) return argmax(logits);
  const auto n = nucleus_of(logits, temp, top_p);
  // 53 random bits; std::uniform_real_distribution is implementation-defined.
  const double u = static_cast<double>(rng() >> 11) * 0x1p-53 * n.mass;
  double acc = 0.0;
  for (std::size_t i = 0; i < n.ids.size(); ++i) {
    acc += n.weights[i];
    if (u < acc) return n.ids[i];
  }
  return n.ids.back();
}

// ---------------------------------------------------------------------------

Runtime::Runtime(const ModelArtifact& m)
    : model_(&m),
      tokenizer_(m.vocabulary),
      vocab_(m.vocabulary.size()),
      embed_(m.embed_dim()),
      hidden_(m.hidden_dim()),
      embedding_(m.tensor("embedding").dequantized()),
      hidden_w_(m.tensor("hidden.weight").dequantized()),
      hidden_b_(m.tensor("hidden.bias").dequantized()),
      output_w_(m.tensor("output.weight").dequantized()),
      output_b_(m.tensor("output.bias").dequantized()) {}

Runtime::State Runtime::start() const { return {std::vector<float>(embed_, 0.0f)}; }

void Runtime::observe(State& s, std::int32_t token) const {
  const float* e = embedding_.data() + static_cast<std::size_t>(token) * embed_;
  for (std::size_t i = 0; i < embed_; ++i) s.context[i] = 0.5f * s.context[i] + 0.5f * e[i];
}

void Runtime::logits(const State& s, std::span<float> out) const {
  std::vector<float> h(hidden_), o(embed_);
  simd::matvec(hidden_w_, hidden_, embed_, s.context, h);
  for (std::size_t i = 0; i < hidden_; ++i) {
    const float a = h[i] + hidden_b_[i];
    h[i] = a / (1.0f + std::fabs(a));
  }
  simd::matvec(output_w_, embed_, hidden_, h, o);
  simd::matvec(embedding_, vocab_, embed_, o, out);
  for (std::size_t i = 0; i < vocab_; ++i) out[i] = out[i] + output_b_[i];
}

GenerationRecord generate(const Runtime& rt, std::span<const std::int32_t> prompt,
                          const SamplingParams& params) {
  params.validate();
  if (prompt.size() > params.context_size) {
    throw PromptTooLong(prompt.size(), params.context_size);
  }
  const auto& m = rt.artifact();
  const auto v = rt.vocab_size();
  std::vector<bool> present(v, false);
  auto state = rt.start();
  for (auto tok : prompt) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= v) {
      throw std::invalid_argument("prompt token out of vocabulary range");
    }
    present[tok] = true;
    rt.observe(state, tok);
  }

  GenerationRecord rec;
  rec.prompt_tokens = static_cast<std::uint32_t>(prompt.size());
  std::mt19937_64 rng(params.seed);
  std::vector<float> raw(v);
  std::vector<double> logits(v);
  std::int32_t prev = BiasRule::kStart;

  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint32_t step = 0; step < params.n_len; ++step) {
    rt.logits(state, raw);
    std::copy(raw.begin(), raw.end(), logits.begin());
    for (const auto& r : m.rules) {
      if (r.trigger != BiasRule::kAny && !present[r.trigger]) continue;
      if (r.prev != BiasRule::kAny && r.prev != prev) continue;
      if (step < r.min_step || step > r.max_step) continue;
      logits[r.target] += r.bias;
    }
    const auto tok = sample_token(logits, params.temp, params.top_p, rng);
    rec.output_ids.push_back(tok);
    rt.observe(state, tok);
    prev = tok;
    if (tok == kEos) break;
  }
  rec.decode_duration =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.output_tokens = static_cast<std::uint32_t>(rec.output_ids.size());
  rec.output_text = rt.tokenizer().decode(rec.output_ids);
  return rec;
}

GenerationRecord generate(const ModelArtifact& m, std::span<const std::int32_t> prompt,
                          const SamplingParams& params) {
  return generate(Runtime(m), prompt, params);
}

GenerationRecord generate_text(const Runtime& rt, std::string_view prompt,
                               const SamplingParams& params) {
  return generate(rt, rt.tokenizer().encode(prompt), params);
}

}  // namespace teeaudit::model
