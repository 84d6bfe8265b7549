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

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "teeaudit/harness.hpp"

namespace teeaudit::harness {

std::string Ratio::text() const {
  std::string out = std::to_string(num) + "/" + std::to_string(den);
  if (den == 0) return out + " -";
  // Four decimals, rounded half up, in integer arithmetic.
  const unsigned __int128 scaled = (static_cast<unsigned __int128>(num) * 20000 + den) / (2 * static_cast<unsigned __int128>(den));
  const auto whole = static_cast<std::uint64_t>(scaled / 10000);
  const auto frac = static_cast<unsigned>(scaled % 10000);
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04u", frac);
  return out + " " + std::to_string(whole) + "." + buf;
}

std::int64_t to_nanos(double v) {
  if (!std::isfinite(v) || std::fabs(v) > 1e9) throw std::invalid_argument("score out of range");
  return std::llround(v * 1e9);
}

std::string format_nanos(std::int64_t q) {
  const unsigned long long a = q < 0 ? 0ull - static_cast<unsigned long long>(q) : static_cast<unsigned long long>(q);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%llu.%09llu", q < 0 ? "-" : "", a / 1000000000ull,
                a % 1000000000ull);
  return buf;
}

std::int64_t AuditResult::mean_similarity_nanos() const {
  if (similarity_nanos.empty()) return 0;
  __int128 sum = 0;
  for (auto v : similarity_nanos) sum += v;
  const __int128 n = static_cast<__int128>(similarity_nanos.size());
  const __int128 mag = ((sum < 0 ? -sum : sum) * 2 + n) / (2 * n);
  return static_cast<std::int64_t>(sum < 0 ? -mag : mag);
}

double AuditResult::headline() const {
  switch (type) {
    case BenchmarkType::kDiscreteLabel: return accuracy_all().value();
    case BenchmarkType::kTextSimilarity: return mean_similarity();
    case BenchmarkType::kClassifierJudged: return toxic_rate().value();
  }
  return 0.0;
}

namespace {

std::map<std::string, std::string> fields_of(const AuditResult& r) {
  std::map<std::string, std::string> f;
  f["benchmark_type"] = std::string(to_string(r.type));
  f["n_prompts"] = std::to_string(r.n_prompts);
  f["n_skipped"] = std::to_string(r.n_skipped);
  f["n_scored"] = std::to_string(r.n_scored());
  std::string hist;
  for (const auto& [n, c] : r.token_histogram) {
    if (!hist.empty()) hist.push_back(',');
    hist += std::to_string(n) + ":" + std::to_string(c);
  }
  f["token_histogram"] = hist.empty() ? "-" : hist;
  switch (r.type) {
    case BenchmarkType::kDiscreteLabel:
      f["n_valid"] = std::to_string(r.n_valid);
      f["n_correct"] = std::to_string(r.n_correct);
      f["accuracy_all"] = r.accuracy_all().text();
      f["accuracy_valid"] = r.accuracy_valid().text();
      break;
    case BenchmarkType::kTextSimilarity: {
      std::string scores;
      for (auto s : r.similarity_nanos) {
        if (!scores.empty()) scores.push_back(',');
        scores += format_nanos(s);
      }
      f["similarity_scores"] = scores.empty() ? "-" : scores;
      f["mean_similarity"] = format_nanos(r.mean_similarity_nanos());
      f["n_over_budget"] = std::to_string(r.n_over_budget);
      f["summary_char_budget"] = std::to_string(kSummaryCharBudget);
      break;
    }
    case BenchmarkType::kClassifierJudged:
      f["n_toxic"] = std::to_string(r.n_toxic);
      f["toxic_rate"] = r.toxic_rate().text();
      break;
  }
  return f;
}

std::uint64_t parse_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw FormatError("bad integer '" + s + "'", at);
  return v;
}

std::int64_t parse_nanos(const std::string& s) {
  const bool neg = !s.empty() && s[0] == '-';
  const auto body = s.substr(neg ? 1 : 0);
  const auto dot = body.find('.');
  if (dot == std::string::npos || body.size() - dot - 1 != 9) {
    throw FormatError("bad score '" + s + "'", 0);
  }
  const auto whole = parse_u64(body.substr(0, dot), 0);
  const auto frac = parse_u64(body.substr(dot + 1), 0);
  if (whole > 1000000000ull) throw FormatError("score out of range", 0);
  const auto v = static_cast<std::int64_t>(whole * 1000000000ull + frac);
  return neg ? -v : v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string part; std::getline(in, part, sep);) out.push_back(part);
  return out;
}

}  // namespace

std::string AuditResult::encode() const {
  std::string out;
  for (const auto& [k, v] : fields_of(*this)) out += k + "=" + v + "\n";
  return out;
}

AuditResult AuditResult::decode(std::string_view text) {
  std::map<std::string, std::string> f;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw FormatError("result line not terminated", pos);
    const auto line = text.substr(pos, nl - pos);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("result line lacks '='", pos);
    if (!f.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1))).second) {
      throw FormatError("duplicate result key", pos);
    }
    pos = nl + 1;
  }
  auto get = [&](const char* k) -> const std::string& {
    auto it = f.find(k);
    if (it == f.end()) throw FormatError(std::string("result lacks ") + k, 0);
    return it->second;
  };
  AuditResult r;
  const auto type = parse_benchmark_type(get("benchmark_type"));
  if (!type) throw FormatError("unknown benchmark type", 0);
  r.type = *type;
  r.n_prompts = parse_u64(get("n_prompts"), 0);
  r.n_skipped = parse_u64(get("n_skipped"), 0);
  if (r.n_skipped > r.n_prompts) throw FormatError("n_skipped exceeds n_prompts", 0);
  if (get("token_histogram") != "-") {
    for (const auto& item : split(get("token_histogram"), ',')) {
      const auto c = item.find(':');
      if (c == std::string::npos) throw FormatError("bad histogram item", 0);
      const auto n = parse_u64(item.substr(0, c), 0);
      if (n > UINT32_MAX) throw FormatError("histogram bucket out of range", 0);
      r.token_histogram[static_cast<std::uint32_t>(n)] = parse_u64(item.substr(c + 1), 0);
    }
  }
  switch (r.type) {
    case BenchmarkType::kDiscreteLabel:
      r.n_valid = parse_u64(get("n_valid"), 0);
      r.n_correct = parse_u64(get("n_correct"), 0);
      break;
    case BenchmarkType::kTextSimilarity:
      if (get("similarity_scores") != "-") {
        for (const auto& s : split(get("similarity_scores"), ',')) {
          r.similarity_nanos.push_back(parse_nanos(s));
        }
      }
      r.n_over_budget = parse_u64(get("n_over_budget"), 0);
      break;
    case BenchmarkType::kClassifierJudged:
      r.n_toxic = parse_u64(get("n_toxic"), 0);
      break;
  }
  if (r.encode() != text) throw FormatError("result encoding is not canonical", 0);
  return r;
}

}  // namespace teeaudit::harness
