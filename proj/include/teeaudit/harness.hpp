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
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "teeaudit/bytes.hpp"
#include "teeaudit/crypto.hpp"
#include "teeaudit/enclave.hpp"
#include "teeaudit/model.hpp"

namespace teeaudit::harness {

using crypto::Digest;

enum class BenchmarkType : std::uint8_t {
  kDiscreteLabel = 1,
  kTextSimilarity = 2,
  kClassifierJudged = 3,
};
std::string_view to_string(BenchmarkType t);
std::optional<BenchmarkType> parse_benchmark_type(std::string_view s);

enum class TemplateId : std::uint8_t { kXSum = 1, kMmlu = 2, kToxicChat = 3 };
std::string_view to_string(TemplateId t);
std::optional<TemplateId> parse_template_id(std::string_view s);

/// The audit code AC: a declarative description interpreted by run_audit.
struct CodeDescriptor {
  BenchmarkType type = BenchmarkType::kDiscreteLabel;
  TemplateId template_id = TemplateId::kMmlu;
  model::SamplingParams sampling;
  bool strict_choice = true;
  double toxicity_threshold = 1.0;
  std::uint32_t embed_dims = 256;
  SandboxLimits limits;
  std::vector<std::string> capabilities;

  /// Task defaults: sampling parameters, scorer settings, capabilities.
  static CodeDescriptor defaults_for(BenchmarkType type);
  bool operator==(const CodeDescriptor&) const = default;
};

/// One dataset item; keys are field names.
using Record = std::map<std::string, std::string>;

class EmptyDataset : public std::invalid_argument {
 public:
  EmptyDataset() : std::invalid_argument("audit dataset is empty") {}
};

class MissingField : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// AC+AD. Wire form: "AABNDL1", version, descriptor block, record blocks.
struct AuditBundle {
  static constexpr std::string_view kMagic = "AABNDL1";
  static constexpr std::uint8_t kVersion = 1;

  CodeDescriptor descriptor;
  std::vector<Record> dataset;

  Bytes encode() const;
  static AuditBundle decode(ByteView bytes);  // throws FormatError / EmptyDataset
  Digest hash() const { return crypto::hash(encode()); }
  bool operator==(const AuditBundle&) const = default;
};

/// Canonical bundle bytes; throws EmptyDataset.
Bytes package_audit(const CodeDescriptor& descriptor, const std::vector<Record>& dataset);

/// Line-delimited JSON import. Item fields per template:
///   mmlu: question, choices[4] (or choice_A..choice_D), answer
///   xsum: document, summary
///   toxicchat: user_input
/// Other scalar fields are kept as strings.
std::vector<Record> import_jsonl(std::string_view text, TemplateId t);

std::string assemble_prompt(const CodeDescriptor& d, const Record& r);

/// 'A'..'D', or nullopt for an unparsable reply. Strict mode accepts one
/// letter optionally followed by punctuation; lenient mode takes the first
/// standalone letter.
std::optional<char> parse_choice(std::string_view response, bool strict = true);

// ---------------------------------------------------------------------------
// Scorers

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Lower-cased words hashed (FNV-1a) into `dims` buckets, L2-normalised.
class HashedBagOfWords final : public Embedder {
 public:
  explicit HashedBagOfWords(std::uint32_t dims = 256) : dims_(dims) {}
  std::vector<double> embed(std::string_view text) const override;
  static std::uint64_t fnv1a(std::string_view s);
  static std::vector<std::string> words(std::string_view text);
  std::uint32_t dims() const { return dims_; }

 private:
  std::uint32_t dims_;
};

/// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

class ToxicityClassifier {
 public:
  virtual ~ToxicityClassifier() = default;
  virtual double score(std::string_view text) const = 0;
  virtual bool is_toxic(std::string_view text) const = 0;
};

/// Sum of per-word weights; toxic when the sum reaches the threshold.
class LexiconClassifier final : public ToxicityClassifier {
 public:
  explicit LexiconClassifier(double threshold = 1.0,
                             std::map<std::string, double> weights = default_lexicon());
  static std::map<std::string, double> default_lexicon();
  double score(std::string_view text) const override;
  bool is_toxic(std::string_view text) const override { return score(text) >= threshold_; }

 private:
  double threshold_;
  std::map<std::string, double> weights_;
};

// ---------------------------------------------------------------------------
// Metrics

/// An unreduced fraction, rendered as "n/d 0.xxxx".
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;
  double value() const { return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0; }
  std::string text() const;
  bool operator==(const Ratio&) const = default;
};

struct DiscreteMetrics {
  std::uint64_t n = 0;
  std::uint64_t n_valid = 0;
  std::uint64_t n_correct = 0;
  Ratio accuracy_all() const { return {n_correct, n}; }
  Ratio accuracy_valid() const { return {n_correct, n_valid}; }
};

struct SimilarityMetrics {
  std::vector<double> scores;
  double mean = 0.0;
};

struct ToxicityMetrics {
  std::uint64_t n = 0;
  std::uint64_t n_toxic = 0;
  Ratio toxic_rate() const { return {n_toxic, n}; }
};

/// gold entries are "A".."D". Throws std::invalid_argument on length mismatch.
DiscreteMetrics score_discrete(const std::vector<std::string>& responses,
                               const std::vector<std::string>& gold, bool strict = true);
SimilarityMetrics score_similarity(const std::vector<std::string>& responses,
                                   const std::vector<std::string>& references,
                                   const Embedder& embedder);
ToxicityMetrics score_toxicity(const std::vector<std::string>& responses,
                               const ToxicityClassifier& classifier);

/// Output-length distribution and throughput. Timing never enters R.
struct TokenStats {
  std::map<std::uint32_t, std::uint64_t> histogram;
  std::uint64_t records = 0;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t output_tokens = 0;
  double decode_seconds = 0.0;

  /// Σ output_tokens / Σ decode_duration, 0 without timing.
  double tokens_per_second() const {
    return decode_seconds > 0.0 ? static_cast<double>(output_tokens) / decode_seconds : 0.0;
  }
  std::map<std::uint32_t, double> pmf() const;
  /// Fraction of records with exactly n output tokens.
  Ratio mass_at(std::uint32_t n) const;
  std::string render() const;
};

TokenStats token_stats(std::span<const model::GenerationRecord> records);

/// A summary is over budget when output_tokens * kCharsPerToken exceeds
/// kSummaryCharBudget.
inline constexpr std::uint32_t kSummaryCharBudget = 150;
inline constexpr std::uint32_t kCharsPerToken = 4;

/// The aggregated result R. Counts exclude skipped prompts from every
/// denominator.
struct AuditResult {
  BenchmarkType type = BenchmarkType::kDiscreteLabel;
  std::uint64_t n_prompts = 0;
  std::uint64_t n_skipped = 0;
  std::uint64_t n_valid = 0;
  std::uint64_t n_correct = 0;
  std::vector<std::int64_t> similarity_nanos;  // per-item scores in units of 1e-9
  std::uint64_t n_over_budget = 0;
  std::uint64_t n_toxic = 0;
  std::map<std::uint32_t, std::uint64_t> token_histogram;

  std::uint64_t n_scored() const { return n_prompts - n_skipped; }
  Ratio accuracy_all() const { return {n_correct, n_scored()}; }
  Ratio accuracy_valid() const { return {n_correct, n_valid}; }
  Ratio toxic_rate() const { return {n_toxic, n_scored()}; }
  /// Mean of similarity_nanos, rounded half away from zero to a nano unit.
  std::int64_t mean_similarity_nanos() const;
  double mean_similarity() const { return static_cast<double>(mean_similarity_nanos()) * 1e-9; }

  /// Sorted "key=value" lines; the bytes hashed into attestations.
  std::string encode() const;
  static AuditResult decode(std::string_view text);  // throws FormatError
  Digest hash() const { return crypto::hash(encode()); }
  /// Headline metric as a fraction or mean, for reports and thresholds.
  double headline() const;
  bool operator==(const AuditResult&) const = default;
};

/// Score in units of 1e-9, rounded half away from zero.
std::int64_t to_nanos(double v);
/// "0.123456789" rendering of a nano-unit score.
std::string format_nanos(std::int64_t nanos);

struct AuditRun {
  AuditResult result;
  TokenStats stats;
};

/// Scorers used by run_audit; defaults built from the descriptor when null.
struct Scorers {
  std::shared_ptr<const Embedder> embedder;
  std::shared_ptr<const ToxicityClassifier> classifier;
};

/// Executes AC over AD inside the sandbox.
AuditRun run_audit(Sandbox& sandbox, const AuditBundle& bundle, Scorers scorers = {});

}  // namespace teeaudit::harness
