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

#include "teeaudit/harness.hpp"

namespace teeaudit::harness {

AuditRun run_audit(Sandbox& sandbox, const AuditBundle& bundle, Scorers scorers) {
  const auto& d = bundle.descriptor;
  if (bundle.dataset.empty()) throw EmptyDataset();
  if (sandbox.capabilities() != d.capabilities) {
    throw std::invalid_argument("sandbox is not bound to this audit descriptor");
  }
  sandbox.require(capability::kTokenize);
  sandbox.require(capability::kGenerate);
  if (d.type == BenchmarkType::kTextSimilarity) {
    sandbox.require(capability::kEmbed);
    if (!scorers.embedder) scorers.embedder = std::make_shared<HashedBagOfWords>(d.embed_dims);
  }
  if (d.type == BenchmarkType::kClassifierJudged) {
    sandbox.require(capability::kClassify);
    if (!scorers.classifier) {
      scorers.classifier = std::make_shared<LexiconClassifier>(d.toxicity_threshold);
    }
  }

  const auto& tok = sandbox.runtime().tokenizer();
  AuditResult r;
  r.type = d.type;
  r.n_prompts = bundle.dataset.size();
  std::vector<model::GenerationRecord> records;
  std::vector<std::string> responses, gold;
  for (const auto& rec : bundle.dataset) {
    const auto ids = tok.encode(assemble_prompt(d, rec));
    if (ids.size() > d.sampling.context_size) {
      ++r.n_skipped;
      continue;
    }
    records.push_back(sandbox.generate(ids, d.sampling));
    responses.push_back(records.back().output_text);
    switch (d.type) {
      case BenchmarkType::kDiscreteLabel: gold.push_back(rec.at("answer")); break;
      case BenchmarkType::kTextSimilarity: gold.push_back(rec.at("summary")); break;
      case BenchmarkType::kClassifierJudged: break;
    }
  }

  switch (d.type) {
    case BenchmarkType::kDiscreteLabel: {
      const auto m = score_discrete(responses, gold, d.strict_choice);
      r.n_valid = m.n_valid;
      r.n_correct = m.n_correct;
      break;
    }
    case BenchmarkType::kTextSimilarity: {
      const auto m = score_similarity(responses, gold, *scorers.embedder);
      for (double s : m.scores) r.similarity_nanos.push_back(to_nanos(s));
      for (const auto& g : records) {
        if (std::uint64_t{g.output_tokens} * kCharsPerToken > kSummaryCharBudget) ++r.n_over_budget;
      }
      break;
    }
    case BenchmarkType::kClassifierJudged:
      r.n_toxic = score_toxicity(responses, *scorers.classifier).n_toxic;
      break;
  }

  AuditRun run;
  run.stats = token_stats(records);
  r.token_histogram = run.stats.histogram;
  run.result = std::move(r);
  return run;
}

}  // namespace teeaudit::harness
