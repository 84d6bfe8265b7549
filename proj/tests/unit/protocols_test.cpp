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

#include "pipeline.hpp"

namespace teeaudit::protocols {
namespace {

using harness::TemplateId;
using teeaudit::testing::fixture_bundle;
using teeaudit::testing::Pipeline;
using teeaudit::testing::toy_model_bytes;

Failure failure_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ProtocolError& e) {
    return e.failure();
  }
  ADD_FAILURE() << "run did not abort";
  return Failure::kMalformedMessage;
}

std::string first_prompt(TemplateId t) {
  const auto b = fixture_bundle(t);
  return harness::assemble_prompt(b.descriptor, b.dataset[0]);
}

/// Prepare and audit once; inference sessions are run by each test.
struct Audited : Pipeline {
  explicit Audited(TemplateId t = TemplateId::kMmlu, int bits = 8)
      : bundle(fixture_bundle(t).encode()),
        prep(prepare(setup, toy_model_bytes(), bits)),
        audit(attestable_audit(setup, prep.quantized_model, bundle)) {}

  InferenceOutcome infer(const std::string& prompt, const RunOptions& opts = {}) {
    InferenceRequest req;
    req.model = prep.quantized_model;
    req.prompt = prompt;
    return inference_session(setup, req, opts);
  }

  ChainArtifacts artifacts(const InferenceOutcome& inf, const std::string& prompt) const {
    return {toy_model_bytes(), prep.quantized_model, bundle,
            audit.result_bytes, prep.attestation, audit.attestation,
            inf.attestation, to_bytes(prompt), to_bytes(inf.response)};
  }

  Bytes bundle;
  PrepareOutcome prep;
  AuditOutcome audit;
};

// -- end to end -------------------------------------------------------------------

TEST(Pipeline, EndToEndVerifiesWithFourLogEntries) {
  Audited a;
  const auto prompt = first_prompt(TemplateId::kMmlu);
  const auto inf = a.infer(prompt);
  ASSERT_EQ(a.log.size(), 4u);
  EXPECT_EQ(a.log.get(0).kind, translog::EntryKind::kImageRegistration);
  EXPECT_EQ(a.log.get(1).kind, translog::EntryKind::kPrepareAttestation);
  EXPECT_EQ(a.log.get(2).kind, translog::EntryKind::kAuditResult);
  EXPECT_EQ(a.log.get(3).kind, translog::EntryKind::kAuditAttestation);
  EXPECT_EQ(a.prep.log_index, 1u);
  EXPECT_EQ(a.audit.result_index, 2u);
  EXPECT_EQ(a.audit.attestation_index, 3u);
  EXPECT_EQ(a.log.get(2).payload, a.audit.result_bytes);
  EXPECT_EQ(inf.result, a.audit.result);

  const auto v = user_verify(prompt, inf.response, inf.attestation, a.log, a.setup.registry);
  EXPECT_TRUE(v.verified) << v.headline() << " " << v.detail;
  EXPECT_EQ(v.headline(), "Verified");
  ASSERT_TRUE(v.chain);
  EXPECT_EQ(v.chain->model, a.prep.model_digest);
  EXPECT_EQ(v.chain->quantized, a.prep.quantized_digest);
  EXPECT_EQ(v.chain->r, a.audit.result);
  EXPECT_TRUE(verify_binding_chain(a.artifacts(inf, prompt), a.setup.registry).verified);
  EXPECT_EQ(a.log.size(), 4u);
}

TEST(Pipeline, PrepareAttestsBothDigests) {
  Pipeline p;
  const auto out = prepare(p.setup, toy_model_bytes(), 4);
  const auto v = verify_attestation(out.attestation, p.setup.registry);
  EXPECT_EQ(v.at(labels::kModel), crypto::hash(toy_model_bytes()));
  EXPECT_EQ(v.at(labels::kQuantized), crypto::hash(out.quantized_model));
  EXPECT_EQ(model::load_model(out.quantized_model),
            model::quantize(model::load_model(toy_model_bytes()), 4));
  EXPECT_EQ(p.log.get(out.log_index).payload, out.attestation);
  EXPECT_EQ(failure_of([&] { prepare(p.setup, toy_model_bytes(), 3); }), Failure::kMalformedMessage);
  EXPECT_EQ(failure_of([&] { prepare(p.setup, out.quantized_model, 4); }), Failure::kMalformedMessage);
  EXPECT_EQ(p.log.size(), 2u);
}

TEST(Pipeline, UnquantizedModelCanBeAuditedDirectly) {
  Pipeline p;
  const auto audit = attestable_audit(p.setup, toy_model_bytes(), fixture_bundle(TemplateId::kToxicChat).encode());
  InferenceRequest req;
  req.model = toy_model_bytes();
  req.prompt = "hello there";
  req.params = model::SamplingParams::toxicity();
  const auto inf = inference_session(p.setup, req);
  const auto v = user_verify(req.prompt, inf.response, inf.attestation, p.log, p.setup.registry);
  EXPECT_TRUE(v.verified) << v.detail;
  EXPECT_FALSE(v.chain->quantized);
  EXPECT_EQ(v.chain->r, audit.result);
}

// -- aborts ------------------------------------------------------------------------

TEST(Abort, UntrustedImageNeverReceivesSecrets) {
  Pipeline p;
  p.setup.image.config = to_bytes("profile=evil");
  Transcript t;
  RunOptions opts;
  opts.transcript = &t;
  EXPECT_EQ(failure_of([&] { prepare(p.setup, toy_model_bytes(), 8, opts); }),
            Failure::kAttestationRejected);
  EXPECT_EQ(t.count("envelope"), 0u);
  EXPECT_EQ(p.log.size(), 1u);
}

TEST(Abort, ForgedKeyAttestationIsRejected) {
  Pipeline p;
  RunOptions opts;
  opts.tamper = [](Message& m) {
    if (m.type == "key-attestation") m.payload[m.payload.size() / 2] ^= 0x10;
  };
  EXPECT_EQ(failure_of([&] { prepare(p.setup, toy_model_bytes(), 8, opts); }),
            Failure::kAttestationRejected);
  opts.tamper = [](Message& m) {
    if (m.type == "kem-public-key") m.payload[0] ^= 1;
  };
  EXPECT_EQ(failure_of([&] { prepare(p.setup, toy_model_bytes(), 8, opts); }),
            Failure::kAttestationRejected);
  EXPECT_EQ(p.log.size(), 1u);
}

TEST(Abort, TamperedEnvelopesFailToDecrypt) {
  Pipeline p;
  for (Role who : {Role::kProvider, Role::kEnclave}) {
    RunOptions opts;
    opts.tamper = [who](Message& m) {
      if (m.type == "envelope" && m.from == who) m.payload.back() ^= 0x80;
    };
    EXPECT_EQ(failure_of([&] { prepare(p.setup, toy_model_bytes(), 8, opts); }),
              Failure::kDecryptFailure);
  }
  RunOptions garbage;
  garbage.tamper = [](Message& m) {
    if (m.type == "envelope") m.payload.resize(3);
  };
  EXPECT_EQ(failure_of([&] { prepare(p.setup, toy_model_bytes(), 8, garbage); }),
            Failure::kDecryptFailure);
}

TEST(Abort, ResultTamperIsCaughtByParties) {
  Pipeline p;
  const auto prep = prepare(p.setup, toy_model_bytes(), 8);
  RunOptions opts;
  opts.tamper = [](Message& m) {
    if (m.type == "result" && m.to == Role::kAuditor) m.payload[0] ^= 1;
  };
  EXPECT_EQ(failure_of([&] {
              attestable_audit(p.setup, prep.quantized_model,
                               fixture_bundle(TemplateId::kMmlu).encode(), opts);
            }),
            Failure::kHashMismatch);
}

TEST(Abort, PerturbedModelIsRefusedBeforeAnyPrompt) {
  Audited a;
  const auto size = a.log.size();
  auto perturbed = model::load_model(a.prep.quantized_model);
  perturbed.tensors[0].levels[0] ^= 1;
  InferenceRequest req;
  req.model = model::serialize(perturbed);
  req.announced_model = a.prep.quantized_digest;
  req.prompt = "secret prompt text";
  Transcript t;
  RunOptions opts;
  opts.transcript = &t;
  const auto wiped = a.backend.zeroized_bytes();
  EXPECT_EQ(failure_of([&] { inference_session(a.setup, req, opts); }), Failure::kModelHashMismatch);
  EXPECT_EQ(a.log.size(), size);
  EXPECT_GT(a.backend.zeroized_bytes(), wiped);
  // The user never got as far as sending the prompt.
  EXPECT_EQ(t.count("envelope"), 1u);

  req.announced_model.reset();
  EXPECT_EQ(failure_of([&] { inference_session(a.setup, req); }), Failure::kNoAuditChain);
}

TEST(Abort, MalformedBundle) {
  Pipeline p;
  EXPECT_EQ(failure_of([&] { attestable_audit(p.setup, toy_model_bytes(), as_bytes("junk")); }),
            Failure::kMalformedMessage);
  EXPECT_EQ(p.log.size(), 1u);
}

TEST(Abort, AuditBudgetExceeded) {
  Pipeline p;
  auto b = fixture_bundle(TemplateId::kXSum);
  b.descriptor.limits.max_output_tokens = 20;
  EXPECT_EQ(failure_of([&] { attestable_audit(p.setup, toy_model_bytes(), b.encode()); }),
            Failure::kResourceExceeded);
  EXPECT_EQ(p.log.size(), 1u);
}

// -- confidentiality ---------------------------------------------------------------

TEST(Confidentiality, TranscriptHoldsNoPlaintextSecrets) {
  Pipeline p;
  Transcript t;
  RunOptions opts;
  opts.transcript = &t;
  const auto prep = prepare(p.setup, toy_model_bytes(), 8, opts);
  const auto bundle = fixture_bundle(TemplateId::kMmlu).encode();
  attestable_audit(p.setup, prep.quantized_model, bundle, opts);
  InferenceRequest req;
  req.model = prep.quantized_model;
  req.prompt = first_prompt(TemplateId::kMmlu);
  const auto inf = inference_session(p.setup, req, opts);

  auto window = [](const Bytes& b) { return ByteView(b).subspan(b.size() / 2, 24); };
  EXPECT_FALSE(t.contains(window(toy_model_bytes())));
  EXPECT_FALSE(t.contains(window(prep.quantized_model)));
  EXPECT_FALSE(t.contains(window(bundle)));
  EXPECT_FALSE(t.contains(as_bytes("GIVE YOUR ANSWER")));
  EXPECT_FALSE(t.contains(as_bytes(req.prompt.substr(200, 24))));
  EXPECT_EQ(t.count("envelope"), 2u + 2u + 3u);
  EXPECT_NE(t.render().find("provider->enclave envelope "), std::string::npos);
  EXPECT_NE(t.render().find("auditor->enclave envelope "), std::string::npos);
  EXPECT_FALSE(inf.response.empty());
}

TEST(Confidentiality, PartiesUseIndependentKeys) {
  Pipeline p;
  Transcript t;
  RunOptions opts;
  opts.transcript = &t;
  attestable_audit(p.setup, toy_model_bytes(), fixture_bundle(TemplateId::kToxicChat).encode(), opts);
  std::vector<Bytes> kem;
  for (const auto& m : t.messages()) {
    if (m.type == "envelope" && m.to == Role::kEnclave) {
      kem.push_back(crypto::EncryptedEnvelope::decode(m.payload).kem_ciphertext);
    }
  }
  ASSERT_EQ(kem.size(), 2u);
  EXPECT_NE(kem[0], kem[1]);
  // Each party checked the enclave itself: one key attestation per party.
  EXPECT_EQ(t.count("key-attestation"), 2u);
}

// -- verification ---------------------------------------------------------------------

TEST(Verify, RejectsEveryBrokenBinding) {
  Audited a;
  const auto prompt = first_prompt(TemplateId::kMmlu);
  const auto inf = a.infer(prompt);
  auto& reg = a.setup.registry;
  EXPECT_EQ(user_verify(prompt, inf.response + "x", inf.attestation, a.log, reg).reason,
            RejectReason::kOutputDigestMismatch);
  EXPECT_EQ(user_verify(prompt + " ", inf.response, inf.attestation, a.log, reg).reason,
            RejectReason::kPromptDigestMismatch);
  EXPECT_EQ(user_verify(prompt, inf.response, a.audit.attestation, a.log, reg).reason,
            RejectReason::kMissingBinding);
  auto flipped = inf.attestation;
  flipped[flipped.size() / 3] ^= 4;
  const auto r = user_verify(prompt, inf.response, flipped, a.log, reg).reason;
  EXPECT_TRUE(r == RejectReason::kSignatureInvalid || r == RejectReason::kMalformed) << to_string(r);

  translog::TransparencyLog empty;
  EXPECT_EQ(user_verify(prompt, inf.response, inf.attestation, empty, reg).reason,
            RejectReason::kNoAuditChain);

  auto revoked = reg;
  revoked.revoke(a.backend.measure(a.setup.image));
  EXPECT_EQ(user_verify(prompt, inf.response, inf.attestation, a.log, revoked).reason,
            RejectReason::kRevokedImage);
  EXPECT_EQ(user_verify(prompt, inf.response, inf.attestation, a.log, TrustedRegistry{}).reason,
            RejectReason::kUnknownBackend);
  EXPECT_EQ(Verdict::reject(RejectReason::kNoAuditChain).headline(), "Rejected(NoAuditChain)");
}

TEST(Verify, RewrittenResultInLogBreaksTheChain) {
  Audited a;
  const auto prompt = first_prompt(TemplateId::kMmlu);
  const auto inf = a.infer(prompt);
  // A second log where R has been replaced but the attestations are copied.
  translog::TransparencyLog forged;
  for (std::uint64_t i = 0; i < a.log.size(); ++i) {
    auto e = a.log.get(i);
    if (e.kind == translog::EntryKind::kAuditResult) {
      auto r = a.audit.result;
      r.n_correct += 1;
      e.payload = to_bytes(r.encode());
    }
    forged.publish(e.kind, e.payload);
  }
  const auto v = user_verify(prompt, inf.response, inf.attestation, forged, a.setup.registry);
  EXPECT_FALSE(v.verified);
  EXPECT_EQ(v.reason, RejectReason::kNoAuditChain) << v.headline();
}

TEST(Verify, ResultFromAnotherAuditIsRejected) {
  Audited a;
  const auto prompt = first_prompt(TemplateId::kMmlu);
  const auto inf = a.infer(prompt);
  const auto other = attestable_audit(a.setup, a.prep.quantized_model,
                                      fixture_bundle(TemplateId::kToxicChat).encode());
  // The original audit still verifies in the full log.
  EXPECT_TRUE(user_verify(prompt, inf.response, inf.attestation, a.log, a.setup.registry).verified);
  // A log that only carries the later audit does not hold the attested R.
  translog::TransparencyLog partial;
  for (std::uint64_t i : {0u, 1u}) partial.publish(a.log.get(i).kind, a.log.get(i).payload);
  for (std::uint64_t i : {other.result_index, other.attestation_index}) {
    partial.publish(a.log.get(i).kind, a.log.get(i).payload);
  }
  const auto v = user_verify(prompt, inf.response, inf.attestation, partial, a.setup.registry);
  EXPECT_EQ(v.reason, RejectReason::kResultDigestMismatch) << v.headline();
}

TEST(Verify, RegulatorFlagsDeficit) {
  Audited a;
  const auto prompt = first_prompt(TemplateId::kMmlu);
  const auto inf = a.infer(prompt);
  RegulatorPolicy policy;
  policy.min_accuracy = 0.6;
  const auto rep = regulator_check(prompt, inf.response, inf.attestation, a.log, a.setup.registry, policy);
  EXPECT_TRUE(rep.verdict.verified);
  EXPECT_TRUE(rep.audit_deficit);
  EXPECT_EQ(rep.deficit, "accuracy 0.5000 < threshold 0.6000");
  const auto text = rep.render();
  EXPECT_NE(text.find(a.prep.model_digest.hex()), std::string::npos);
  EXPECT_NE(text.find("accuracy_all=10/20 0.5000"), std::string::npos);
  EXPECT_NE(text.find("audit deficit: yes"), std::string::npos);
  policy.min_accuracy = 0.5;
  EXPECT_FALSE(regulator_check(prompt, inf.response, inf.attestation, a.log, a.setup.registry, policy)
                   .audit_deficit);
}

TEST(Verify, BindingChainDetectsSubstitutions) {
  Audited a;
  const auto prompt = first_prompt(TemplateId::kMmlu);
  const auto inf = a.infer(prompt);
  const auto good = a.artifacts(inf, prompt);
  auto& reg = a.setup.registry;
  ASSERT_TRUE(verify_binding_chain(good, reg).verified);

  auto c = good;
  c.model.back() ^= 1;
  EXPECT_EQ(verify_binding_chain(c, reg).reason, RejectReason::kModelDigestMismatch);
  c = good;
  c.bundle = fixture_bundle(TemplateId::kXSum).encode();
  EXPECT_EQ(verify_binding_chain(c, reg).reason, RejectReason::kBundleDigestMismatch);
  c = good;
  c.result.push_back('\n');
  EXPECT_EQ(verify_binding_chain(c, reg).reason, RejectReason::kResultDigestMismatch);
  c = good;
  c.prompt.push_back('?');
  EXPECT_EQ(verify_binding_chain(c, reg).reason, RejectReason::kPromptDigestMismatch);
  c = good;
  c.response.push_back('.');
  EXPECT_EQ(verify_binding_chain(c, reg).reason, RejectReason::kOutputDigestMismatch);
  c = good;
  c.audit_attestation = c.prepare_attestation;
  EXPECT_FALSE(verify_binding_chain(c, reg).verified);
}

// -- statelessness -----------------------------------------------------------------------

TEST(Stateless, SameInputsGiveSameOutput) {
  Audited a(TemplateId::kXSum);
  const auto prompt = first_prompt(TemplateId::kXSum);
  InferenceRequest req;
  req.model = a.prep.quantized_model;
  req.prompt = prompt;
  req.params = model::SamplingParams::summarization();
  const auto x1 = inference_session(a.setup, req).response;
  const auto x2 = inference_session(a.setup, req).response;
  EXPECT_EQ(x1, x2);

  // An unrelated session in between leaves no trace.
  Pipeline fresh(99);
  const auto prep = prepare(fresh.setup, toy_model_bytes(), 8);
  attestable_audit(fresh.setup, prep.quantized_model, a.bundle);
  auto other = req;
  other.model = prep.quantized_model;
  other.prompt = "system: unrelated\nuser: tell me something else entirely";
  other.params.seed = 4;
  inference_session(fresh.setup, other);
  EXPECT_EQ(inference_session(fresh.setup, req).response, x1);

  // And the enclave output equals plain generation outside any enclave.
  const auto served = model::load_model(req.model);
  const model::Runtime rt(served);
  EXPECT_EQ(model::generate_text(rt, prompt, req.params).output_text, x1);
}

}  // namespace
}  // namespace teeaudit::protocols
