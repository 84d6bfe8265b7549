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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "teeaudit/model.hpp"
#include "teeaudit/toy_model.hpp"

namespace teeaudit::model {
namespace {

ModelArtifact tiny_model() {
  ModelArtifact m;
  m.name = "tiny";
  m.version = "1";
  m.vocabulary = kSpecialTokens;
  for (const char* w : {"red", "green", "blue", "."}) m.vocabulary.emplace_back(w);
  const auto v = static_cast<std::uint32_t>(m.vocabulary.size());
  auto tensor = [](std::string name, std::vector<std::uint32_t> dims) {
    Tensor t;
    t.name = std::move(name);
    t.dims = std::move(dims);
    t.values.resize(t.element_count());
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      t.values[i] = 0.01f * static_cast<float>((i * 7) % 11) - 0.05f;
    }
    return t;
  };
  m.tensors = {tensor("embedding", {v, 2}), tensor("hidden.weight", {3, 2}),
               tensor("hidden.bias", {3}), tensor("output.weight", {2, 3}),
               tensor("output.bias", {v})};
  return m;
}

// -- format ------------------------------------------------------------------

TEST(ModelFormat, RoundTripIsExact) {
  auto m = tiny_model();
  m.rules.push_back({BiasRule::kAny, BiasRule::kStart, 0, 0, 5, 12.5f});
  const auto bytes = serialize(m);
  EXPECT_EQ(to_string(ByteView(bytes).first(kModelMagic.size())), kModelMagic);
  const auto back = load_model(bytes);
  EXPECT_EQ(back, m);
  EXPECT_EQ(serialize(back), bytes);
  EXPECT_EQ(model_hash(back), crypto::hash(bytes));
}

TEST(ModelFormat, StrictDecoding) {
  const auto bytes = serialize(tiny_model());
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(load_model(trailing), FormatError);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(load_model(ByteView(bytes).first(cut)), FormatError) << cut;
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    load_model(bad_magic);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(ModelFormat, ValidateCatchesShapeErrors) {
  EXPECT_NO_THROW(validate(tiny_model()));
  auto m = tiny_model();
  m.tensors[1].dims = {2, 3};
  EXPECT_THROW(validate(m), FormatError);
  m = tiny_model();
  m.vocabulary[0] = "bos";
  EXPECT_THROW(validate(m), FormatError);
  m = tiny_model();
  m.rules.push_back({BiasRule::kAny, BiasRule::kAny, 0, 1, 99, 1.0f});
  EXPECT_THROW(validate(m), FormatError);
  m = tiny_model();
  m.tensors.pop_back();
  EXPECT_THROW(validate(m), FormatError);
}

TEST(ModelFormat, ToyModelShape) {
  const auto m = build_toy_model();
  EXPECT_NO_THROW(validate(m));
  EXPECT_EQ(m.embed_dim(), kToyEmbedDim);
  EXPECT_EQ(m.hidden_dim(), kToyHiddenDim);
  EXPECT_EQ(serialize(build_toy_model()), serialize(m));
  EXPECT_NE(serialize(build_toy_model(kToyWeightSeed + 1)), serialize(m));
}

// -- tokenizer ---------------------------------------------------------------

TEST(Tokenizer, SplitsWordsAndPunctuation) {
  EXPECT_EQ(Tokenizer::split("Hello, world!  it's A)"),
            (std::vector<std::string>{"Hello", ",", "world", "!", "it's", "A", ")"}));
  EXPECT_TRUE(Tokenizer::split("  \n\t").empty());
}

TEST(Tokenizer, EncodeFallsBackToLowercaseThenUnknown) {
  const auto m = tiny_model();
  const Tokenizer t(m.vocabulary);
  EXPECT_EQ(t.encode("Red blue purple ."), (std::vector<std::int32_t>{5, 7, kUnk, 8}));
}

TEST(Tokenizer, DecodeJoinsAndDropsSpecials) {
  const auto m = tiny_model();
  const Tokenizer t(m.vocabulary);
  EXPECT_EQ(t.decode(std::vector<std::int32_t>{kBos, 5, 6, 8, kEos}), "red green.");
  EXPECT_EQ(t.decode(std::vector<std::int32_t>{kUnk, 7}), "<unk> blue");
  EXPECT_EQ(t.decode(std::vector<std::int32_t>{}), "");
}

// -- sampling ----------------------------------------------------------------

TEST(SamplingParams, TaskPresets) {
  const auto s = SamplingParams::summarization();
  EXPECT_EQ(s.context_size, 8192u);
  EXPECT_EQ(s.n_len, 512u);
  EXPECT_EQ(s.seed, 1337u);
  EXPECT_EQ(s.temp, 0.1);
  EXPECT_EQ(s.top_p, 0.7);
  const auto c = SamplingParams::classification();
  EXPECT_EQ(c.context_size, 4096u);
  EXPECT_EQ(c.n_len, 256u);
  EXPECT_EQ(c.seed, 1337u);
  EXPECT_EQ(c.temp, 0.25);
  EXPECT_EQ(c.top_p, 0.7);
  const auto t = SamplingParams::toxicity();
  EXPECT_EQ(t.context_size, 4096u);
  EXPECT_EQ(t.n_len, 256u);
  EXPECT_EQ(t.seed, 1337u);
  EXPECT_EQ(t.temp, 0.3);
  EXPECT_EQ(t.top_p, 0.75);
}

TEST(SamplingParams, ValidateRejectsOutOfRange) {
  auto p = SamplingParams::classification();
  EXPECT_NO_THROW(p.validate());
  for (double bad : {0.0, -0.1, 1.5, std::nan("")}) {
    auto q = p;
    q.temp = bad;
    EXPECT_THROW(q.validate(), std::invalid_argument);
    q = p;
    q.top_p = bad;
    EXPECT_THROW(q.validate(), std::invalid_argument);
  }
  auto q = p;
  q.n_len = 0;
  EXPECT_THROW(q.validate(), std::invalid_argument);
  q = p;
  q.context_size = 0;
  EXPECT_THROW(q.validate(), std::invalid_argument);
}

TEST(DeterministicExp, CloseToLibm) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-700.0, 700.0);
  for (int i = 0; i < 20000; ++i) {
    const double x = i < 100 ? (i - 50) * 0.01 : d(rng);
    const double ours = deterministic_exp(x);
    const double ref = std::exp(x);
    ASSERT_LE(std::fabs(ours - ref), 4e-16 * ref) << x;
  }
  EXPECT_EQ(deterministic_exp(0.0), 1.0);
  EXPECT_EQ(deterministic_exp(-1000.0), 0.0);
  EXPECT_TRUE(std::isinf(deterministic_exp(1000.0)));
  EXPECT_TRUE(std::isnan(deterministic_exp(NAN)));
}

// Long-double reference; tie and threshold decisions checked by hand.
std::vector<std::int32_t> oracle_nucleus(const std::vector<double>& logits, double temp,
                                         double top_p, bool* ambiguous) {
  const long double hi = *std::max_element(logits.begin(), logits.end()) / temp;
  std::vector<long double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] / temp - hi);
  std::vector<std::int32_t> ids(p.size());
  std::iota(ids.begin(), ids.end(), 0);
  // Selection sort: largest first, lowest id among equals.
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      if (p[ids[j]] > p[ids[best]] || (p[ids[j]] == p[ids[best]] && ids[j] < ids[best])) best = j;
    }
    std::swap(ids[i], ids[best]);
  }
  const long double total = std::accumulate(p.begin(), p.end(), 0.0L);
  const long double target = top_p * total;
  long double cum = 0;
  std::vector<std::int32_t> out;
  *ambiguous = false;
  for (auto id : ids) {
    out.push_back(id);
    cum += p[id];
    if (std::fabs(static_cast<double>(cum - target)) < 1e-9 * static_cast<double>(total)) *ambiguous = true;
    if (cum >= target) break;
  }
  return out;
}

TEST(Nucleus, MatchesBruteForce) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(0.0, 2.0);
  int compared = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<double> logits(2 + rng() % 40);
    for (auto& l : logits) l = d(rng);
    const double temp = 0.05 + 0.95 * static_cast<double>(rng() % 1000) / 1000.0;
    const double top_p = 0.05 + 0.95 * static_cast<double>(rng() % 1000) / 1000.0;
    bool ambiguous = false;
    const auto want = oracle_nucleus(logits, temp, top_p, &ambiguous);
    if (ambiguous) continue;
    ASSERT_EQ(nucleus(logits, temp, top_p), want) << "trial " << trial;
    ++compared;
  }
  EXPECT_GT(compared, 2900);
}

TEST(Nucleus, TiesPreferLowerIdAndTopPOneKeepsAll) {
  const std::vector<double> flat(6, 1.0);
  EXPECT_EQ(nucleus(flat, 1.0, 0.5), (std::vector<std::int32_t>{0, 1, 2}));
  EXPECT_EQ(nucleus(flat, 1.0, 1.0).size(), 6u);
  EXPECT_EQ(nucleus(std::vector<double>{0, 5, 5}, 1e-7, 0.9), (std::vector<std::int32_t>{1}));
  EXPECT_TRUE(nucleus(std::vector<double>{}, 1.0, 1.0).empty());
}

TEST(SampleToken, GreedyBelowThreshold) {
  std::mt19937_64 rng(3);
  const std::vector<double> logits{0.1, 3.0, 3.0, -1.0};
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_token(logits, kGreedyTemperature, 0.9, rng), 1);
  EXPECT_THROW(sample_token(std::vector<double>{}, 1.0, 1.0, rng), std::invalid_argument);
}

TEST(SampleToken, FrequenciesFollowRenormalisedNucleus) {
  std::mt19937_64 rng(4);
  // Probabilities 1:2:3:4 at temp 1; top_p 0.65 keeps {3, 2} -> 4:3 within the nucleus.
  const std::vector<double> logits{std::log(1.0), std::log(2.0), std::log(3.0), std::log(4.0)};
  std::array<int, 4> counts{};
  constexpr int kDraws = 70000;
  for (int i = 0; i < kDraws; ++i) ++counts[sample_token(logits, 1.0, 0.65, rng)];
  EXPECT_EQ(counts[0], 0);
  EXPECT_EQ(counts[1], 0);
  const double p3 = 4.0 / 7.0;
  const double sigma = std::sqrt(kDraws * p3 * (1 - p3));
  EXPECT_NEAR(counts[3], kDraws * p3, 4 * sigma);
}

TEST(SampleToken, SameSeedSameSequence) {
  const std::vector<double> logits{0.3, 0.2, 0.9, 0.1, 0.5};
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(sample_token(logits, 0.8, 0.95, a), sample_token(logits, 0.8, 0.95, b));
}

// -- generation --------------------------------------------------------------

TEST(Generate, BiasRulesScriptOutputAndStopAtEos) {
  auto m = tiny_model();
  m.rules.push_back({BiasRule::kAny, BiasRule::kStart, 0, 0, 6, 40.0f});
  m.rules.push_back({BiasRule::kAny, 6, 0, BiasRule::kOpen, 8, 40.0f});
  m.rules.push_back({BiasRule::kAny, 8, 0, BiasRule::kOpen, kEos, 40.0f});
  const auto rec = generate(m, std::vector<std::int32_t>{5}, SamplingParams::classification());
  EXPECT_EQ(rec.output_ids, (std::vector<std::int32_t>{6, 8, kEos}));
  EXPECT_EQ(rec.output_text, "green.");
  EXPECT_EQ(rec.output_tokens, 3u);
  EXPECT_EQ(rec.prompt_tokens, 1u);
}

TEST(Generate, TriggerAndStepWindow) {
  auto m = tiny_model();
  m.rules.push_back({7, BiasRule::kAny, 0, BiasRule::kOpen, 7, 40.0f});
  m.rules.push_back({BiasRule::kAny, BiasRule::kAny, 3, BiasRule::kOpen, kEos, 80.0f});
  const Runtime rt(m);
  auto p = SamplingParams::classification();
  const auto with = generate(rt, std::vector<std::int32_t>{7}, p);
  EXPECT_EQ(with.output_ids, (std::vector<std::int32_t>{7, 7, 7, kEos}));
  const auto without = generate(rt, std::vector<std::int32_t>{5}, p);
  EXPECT_EQ(without.output_ids.size(), 4u);
  EXPECT_EQ(without.output_ids.back(), kEos);
}

TEST(Generate, RespectsLengthAndContext) {
  const auto m = tiny_model();
  auto p = SamplingParams::classification();
  p.n_len = 7;
  p.temp = 1.0;
  p.top_p = 1.0;
  const auto rec = generate(m, std::vector<std::int32_t>{5, 6}, p);
  EXPECT_LE(rec.output_tokens, 7u);
  p.context_size = 1;
  try {
    generate(m, std::vector<std::int32_t>{5, 6}, p);
    FAIL();
  } catch (const PromptTooLong& e) {
    EXPECT_EQ(e.tokens(), 2u);
  }
  EXPECT_THROW(generate(m, std::vector<std::int32_t>{99}, SamplingParams::classification()),
               std::invalid_argument);
}

TEST(Generate, DeterministicForSameInputs) {
  const auto m = build_toy_model();
  const Runtime rt(m);
  auto p = SamplingParams::summarization();
  p.temp = 1.0;
  p.top_p = 1.0;
  p.n_len = 40;
  const auto a = generate_text(rt, "hello there", p);
  const auto b = generate_text(Runtime(m), "hello there", p);
  EXPECT_EQ(a.output_ids, b.output_ids);
  p.seed = 1338;
  const auto c = generate_text(rt, "hello there", p);
  EXPECT_NE(a.output_ids, c.output_ids);
}

TEST(Generate, QuantizedRuntimeUsesDequantizedWeights) {
  const auto m = build_toy_model();
  const auto q = quantize(m, 8);
  const Runtime rt(q);
  auto s = rt.start();
  rt.observe(s, 10);
  std::vector<float> logits(rt.vocab_size());
  rt.logits(s, logits);
  for (float l : logits) EXPECT_TRUE(std::isfinite(l));
}

}  // namespace
}  // namespace teeaudit::model
