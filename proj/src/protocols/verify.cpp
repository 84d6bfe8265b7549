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
#include <cstdio>

#include "teeaudit/protocols.hpp"

namespace teeaudit::protocols {

namespace L = labels;
using translog::EntryKind;
using translog::LogEntry;

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kNone: return "None";
    case RejectReason::kMalformed: return "Malformed";
    case RejectReason::kUnknownBackend: return "UnknownBackend";
    case RejectReason::kSignatureInvalid: return "SignatureInvalid";
    case RejectReason::kUntrustedImage: return "UntrustedImage";
    case RejectReason::kRevokedImage: return "RevokedImage";
    case RejectReason::kMissingBinding: return "MissingBinding";
    case RejectReason::kPromptDigestMismatch: return "PromptDigestMismatch";
    case RejectReason::kOutputDigestMismatch: return "OutputDigestMismatch";
    case RejectReason::kModelDigestMismatch: return "ModelDigestMismatch";
    case RejectReason::kBundleDigestMismatch: return "BundleDigestMismatch";
    case RejectReason::kResultDigestMismatch: return "ResultDigestMismatch";
    case RejectReason::kNoAuditChain: return "NoAuditChain";
    case RejectReason::kLogInconsistent: return "LogInconsistent";
  }
  return "?";
}

Verdict Verdict::reject(RejectReason r, std::string detail) {
  Verdict v;
  v.reason = r;
  v.detail = std::move(detail);
  return v;
}

std::string Verdict::headline() const {
  return verified ? "Verified" : "Rejected(" + std::string(to_string(reason)) + ")";
}

namespace {

RejectReason reason_for(AttestationFailure f) {
  switch (f) {
    case AttestationFailure::kMalformed: return RejectReason::kMalformed;
    case AttestationFailure::kUnknownBackend: return RejectReason::kUnknownBackend;
    case AttestationFailure::kSignatureInvalid: return RejectReason::kSignatureInvalid;
    case AttestationFailure::kUntrustedImage: return RejectReason::kUntrustedImage;
    case AttestationFailure::kRevokedImage: return RejectReason::kRevokedImage;
  }
  return RejectReason::kMalformed;
}

std::optional<VerifiedAttestation> try_verify(ByteView doc, const TrustedRegistry& registry) {
  try {
    return verify_attestation(doc, registry);
  } catch (const AttestationError&) {
    return std::nullopt;
  }
}

std::vector<std::pair<LogEntry, VerifiedAttestation>> attestations(
    translog::LogStore& log, const TrustedRegistry& registry, const Digest& d, EntryKind kind) {
  std::vector<std::pair<LogEntry, VerifiedAttestation>> out;
  for (auto& e : log.scan(d)) {
    if (e.kind != kind) continue;
    if (auto v = try_verify(e.payload, registry)) out.emplace_back(std::move(e), std::move(*v));
  }
  return out;
}

std::optional<std::pair<LogEntry, harness::AuditResult>> result_entry(translog::LogStore& log,
                                                                      const Digest& d) {
  for (auto& e : log.scan(d)) {
    if (e.kind != EntryKind::kAuditResult || crypto::hash(e.payload) != d) continue;
    try {
      auto r = harness::AuditResult::decode(teeaudit::to_string(e.payload));
      return std::pair{std::move(e), std::move(r)};
    } catch (const FormatError&) {
    }
  }
  return std::nullopt;
}

bool included(translog::LogStore& log, const LogEntry& e) {
  const auto root = log.root();
  return translog::verify_inclusion(root, e.leaf_hash, log.prove(e.index));
}

}  // namespace

std::vector<AuditChain> find_audit_chains(translog::LogStore& log, const TrustedRegistry& registry,
                                          const Digest& model) {
  // Audited digests reachable from `model`, with the prepare entry that links them.
  struct Target {
    Digest audited;
    Digest original;
    std::optional<LogEntry> prepare;
  };
  std::vector<Target> targets{{model, model, std::nullopt}};
  for (auto& [e, v] : attestations(log, registry, model, EntryKind::kPrepareAttestation)) {
    const auto m = v.find(L::kModel);
    const auto q = v.find(L::kQuantized);
    if (!m || !q) continue;
    if (*q == model) {
      if (!targets[0].prepare) targets[0] = {model, *m, e};
    } else if (*m == model) {
      targets.push_back({*q, model, e});
    }
  }

  std::vector<AuditChain> out;
  for (const auto& [target, original, prep] : targets) {
    for (auto& [e, v] : attestations(log, registry, target, EntryKind::kAuditAttestation)) {
      const auto m = v.find(L::kModel);
      const auto a = v.find(L::kAudit);
      const auto r = v.find(L::kResult);
      if (!m || !a || !r || *m != target) continue;
      auto res = result_entry(log, *r);
      if (!res) continue;
      AuditChain c;
      c.model = original;
      if (prep) c.quantized = target;
      c.audit = *a;
      c.result = *r;
      c.prepare_entry = prep;
      c.audit_entry = e;
      c.result_entry = std::move(res->first);
      c.r = std::move(res->second);
      out.push_back(std::move(c));
    }
  }
  std::sort(out.begin(), out.end(), [](const AuditChain& x, const AuditChain& y) {
    return x.audit_entry.index > y.audit_entry.index;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const AuditChain& x, const AuditChain& y) {
                          return x.audit_entry.index == y.audit_entry.index;
                        }),
            out.end());
  return out;
}

Verdict user_verify(std::string_view prompt, std::string_view response, ByteView doc,
                    translog::LogStore& log, const TrustedRegistry& registry) {
  VerifiedAttestation v;
  try {
    v = verify_attestation(doc, registry);
  } catch (const AttestationError& e) {
    return Verdict::reject(reason_for(e.failure()), e.what());
  }
  const auto m = v.find(L::kModel);
  const auto p = v.find(L::kPrompt);
  const auto x = v.find(L::kOutput);
  const auto r = v.find(L::kResult);
  if (!m || !p || !x || !r) {
    return Verdict::reject(RejectReason::kMissingBinding, "inference attestation is incomplete");
  }
  if (*p != crypto::hash(prompt)) return Verdict::reject(RejectReason::kPromptDigestMismatch);
  if (*x != crypto::hash(response)) return Verdict::reject(RejectReason::kOutputDigestMismatch);

  const auto chains = find_audit_chains(log, registry, *m);
  if (chains.empty()) {
    return Verdict::reject(RejectReason::kNoAuditChain, "no audit in the log for model " + m->hex());
  }
  const auto it = std::find_if(chains.begin(), chains.end(),
                               [&](const AuditChain& c) { return c.result == *r; });
  if (it == chains.end()) {
    return Verdict::reject(RejectReason::kResultDigestMismatch,
                           "attested result is not the published one");
  }
  for (const auto* e : {&it->audit_entry, &it->result_entry}) {
    if (!included(log, *e)) return Verdict::reject(RejectReason::kLogInconsistent);
  }
  if (it->prepare_entry && !included(log, *it->prepare_entry)) {
    return Verdict::reject(RejectReason::kLogInconsistent);
  }
  Verdict out;
  out.verified = true;
  out.chain = *it;
  return out;
}

std::string RegulatorReport::render() const {
  std::string out = "verdict: " + verdict.headline() + "\n";
  if (!verdict.detail.empty()) out += "detail: " + verdict.detail + "\n";
  if (const auto& c = verdict.chain) {
    out += "model digest: " + c->model.hex() + "\n";
    if (c->quantized) out += "quantized digest: " + c->quantized->hex() + "\n";
    out += "audit bundle digest: " + c->audit.hex() + "\n";
    out += "result digest: " + c->result.hex() + "\n";
    if (c->prepare_entry) {
      out += "prepare attestation: log index " + std::to_string(c->prepare_entry->index) + "\n";
    }
    out += "audit attestation: log index " + std::to_string(c->audit_entry.index) + "\n";
    out += "audit result: log index " + std::to_string(c->result_entry.index) + "\n";
    out += "R:\n";
    const auto text = c->r.encode();
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      out += "  " + text.substr(pos, nl - pos) + "\n";
      pos = nl + 1;
    }
    out += "audit deficit: " + (audit_deficit ? "yes (" + deficit + ")" : std::string("no")) + "\n";
  }
  return out;
}

RegulatorReport regulator_check(std::string_view prompt, std::string_view response,
                                 ByteView doc, translog::LogStore& log,
                                 const TrustedRegistry& registry,
                                 const RegulatorPolicy& policy) {
  RegulatorReport rep;
  rep.verdict = user_verify(prompt, response, doc, log, registry);
  if (!rep.verdict.verified) return rep;
  const auto& r = rep.verdict.chain->r;
  char buf[128];
  auto flag = [&](const char* what, double got, const char* op, double limit) {
    rep.audit_deficit = true;
    std::snprintf(buf, sizeof buf, "%s %.4f %s threshold %.4f", what, got, op, limit);
    rep.deficit = buf;
  };
  switch (r.type) {
    case harness::BenchmarkType::kDiscreteLabel:
      if (policy.min_accuracy && r.accuracy_all().value() < *policy.min_accuracy) {
        flag("accuracy", r.accuracy_all().value(), "<", *policy.min_accuracy);
      }
      break;
    case harness::BenchmarkType::kTextSimilarity:
      if (policy.min_similarity && r.mean_similarity() < *policy.min_similarity) {
        flag("mean similarity", r.mean_similarity(), "<", *policy.min_similarity);
      }
      break;
    case harness::BenchmarkType::kClassifierJudged:
      if (policy.max_toxic_rate && r.toxic_rate().value() > *policy.max_toxic_rate) {
        flag("toxic rate", r.toxic_rate().value(), ">", *policy.max_toxic_rate);
      }
      break;
  }
  return rep;
}

Verdict verify_binding_chain(const ChainArtifacts& a, const TrustedRegistry& registry) {
  const std::pair<const Bytes*, const char*> docs[] = {{&a.prepare_attestation, "prepare"},
                                                       {&a.audit_attestation, "audit"},
                                                       {&a.inference_attestation, "inference"}};
  std::vector<VerifiedAttestation> views;
  for (const auto& [doc, name] : docs) {
    try {
      views.push_back(verify_attestation(*doc, registry));
    } catch (const AttestationError& e) {
      return Verdict::reject(reason_for(e.failure()), std::string(name) + ": " + e.what());
    }
  }
  const auto& prep = views[0];
  const auto& audit = views[1];
  const auto& inf = views[2];
  const auto need = [](const VerifiedAttestation& v, std::string_view l) { return v.find(l); };
  const auto pm = need(prep, L::kModel), pq = need(prep, L::kQuantized);
  const auto am = need(audit, L::kModel), aa = need(audit, L::kAudit), ar = need(audit, L::kResult);
  const auto im = need(inf, L::kModel), ip = need(inf, L::kPrompt), io = need(inf, L::kOutput),
             ir = need(inf, L::kResult);
  if (!pm || !pq || !am || !aa || !ar || !im || !ip || !io || !ir) {
    return Verdict::reject(RejectReason::kMissingBinding);
  }
  const auto h_m = crypto::hash(a.model);
  const auto h_q = crypto::hash(a.quantized_model);
  const auto h_r = crypto::hash(a.result);
  if (*pm != h_m || *pq != h_q || *am != h_q || (*im != h_m && *im != h_q)) {
    return Verdict::reject(RejectReason::kModelDigestMismatch);
  }
  if (*aa != crypto::hash(a.bundle)) return Verdict::reject(RejectReason::kBundleDigestMismatch);
  if (*ar != h_r || *ir != h_r) return Verdict::reject(RejectReason::kResultDigestMismatch);
  if (*ip != crypto::hash(a.prompt)) return Verdict::reject(RejectReason::kPromptDigestMismatch);
  if (*io != crypto::hash(a.response)) return Verdict::reject(RejectReason::kOutputDigestMismatch);
  AuditChain c;
  try {
    c.r = harness::AuditResult::decode(teeaudit::to_string(a.result));
  } catch (const FormatError& e) {
    return Verdict::reject(RejectReason::kMalformed, e.what());
  }
  c.model = h_m;
  c.quantized = h_q;
  c.audit = *aa;
  c.result = h_r;
  Verdict v;
  v.verified = true;
  v.chain = std::move(c);
  return v;
}

}  // namespace teeaudit::protocols
