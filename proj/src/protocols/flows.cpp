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

#include "teeaudit/protocols.hpp"

namespace teeaudit::protocols {

namespace {

namespace L = labels;
using crypto::EncryptedEnvelope;
using crypto::SymmetricKey;

constexpr std::string_view kKeyAttestation = "key-attestation";
constexpr std::string_view kKemPublicKey = "kem-public-key";
constexpr std::string_view kEnvelope = "envelope";
constexpr std::string_view kAttestation = "attestation";
constexpr std::string_view kResult = "result";
constexpr std::string_view kModelRef = "model-ref";

Bytes digest_bytes(const Digest& d) { return Bytes(d.view().begin(), d.view().end()); }

VerifiedAttestation party_verify(ByteView doc, const TrustedRegistry& registry) {
  try {
    return verify_attestation(doc, registry);
  } catch (const AttestationError& e) {
    throw ProtocolError(Failure::kAttestationRejected, e.what());
  }
}

const Digest& bound(const VerifiedAttestation& v, std::string_view label) {
  try {
    return v.at(label);
  } catch (const std::out_of_range& e) {
    throw ProtocolError(Failure::kAttestationRejected, e.what());
  }
}

/// Enclave side: fresh keypair plus an attestation binding it.
struct KeyOffer {
  Bytes doc;
  Bytes pk;
};

KeyOffer offer_key(EnclaveSession& s, std::vector<Binding> extra = {}) {
  const auto& pk = s.generate_keypair();
  std::vector<Binding> data{{std::string(L::kKemPublicKey), crypto::hash(pk.view())}};
  data.insert(data.end(), extra.begin(), extra.end());
  return {s.attest(data).encode(), Bytes(pk.view().begin(), pk.view().end())};
}

void send_offer(Channel& ch, const KeyOffer& o) {
  ch.send(Role::kEnclave, std::string(kKeyAttestation), o.doc);
  ch.send(Role::kEnclave, std::string(kKemPublicKey), o.pk);
}

/// Party side: the verified key attestation and the public key it binds.
struct AcceptedKey {
  Bytes doc;
  VerifiedAttestation view;
  crypto::KemPublicKey pk;
};

AcceptedKey accept_key(Channel& ch, Role at, const TrustedRegistry& registry) {
  auto doc = ch.receive(at, kKeyAttestation).payload;
  auto pk_bytes = ch.receive(at, kKemPublicKey).payload;
  auto view = party_verify(doc, registry);
  if (bound(view, L::kKemPublicKey) != crypto::hash(pk_bytes)) {
    throw ProtocolError(Failure::kAttestationRejected, "public key is not the attested one");
  }
  crypto::KemPublicKey pk;
  try {
    pk = crypto::KemPublicKey::from_bytes(pk_bytes);
  } catch (const crypto::CryptoError& e) {
    throw ProtocolError(Failure::kAttestationRejected, e.what());
  }
  return {std::move(doc), std::move(view), pk};
}

/// Party side: seal a secret to the attested key, bound to its attestation.
void send_sealed(Channel& ch, Role from, const AcceptedKey& key, ByteView secret,
                 SymmetricKey& k) {
  crypto::SystemRandom rng;
  const auto aad = crypto::hash(key.doc);
  auto env = crypto::seal_to(key.pk, secret, aad.view(), rng, &k);
  ch.send(from, std::string(kEnvelope), env.encode());
}

/// Enclave side: open an inbound envelope bound to `key_doc`.
std::size_t receive_sealed(Channel& ch, EnclaveSession& s, ByteView key_doc) {
  const auto m = ch.receive(Role::kEnclave, kEnvelope);
  try {
    const auto env = EncryptedEnvelope::decode(m.payload);
    if (env.associated_data != digest_bytes(crypto::hash(key_doc))) {
      throw ProtocolError(Failure::kDecryptFailure, "envelope bound to another session");
    }
    return s.receive(env);
  } catch (const crypto::CryptoError& e) {
    throw ProtocolError(Failure::kDecryptFailure, e.what());
  } catch (const FormatError& e) {
    throw ProtocolError(Failure::kDecryptFailure, e.what());
  }
}

/// Party side: decrypt an enclave reply bound to attestation `doc`.
Bytes open_reply(const Message& m, const SymmetricKey& k, ByteView doc) {
  try {
    const auto env = EncryptedEnvelope::decode(m.payload);
    if (env.associated_data != digest_bytes(crypto::hash(doc))) {
      throw ProtocolError(Failure::kDecryptFailure, "reply bound to another attestation");
    }
    return crypto::open_with(k, env);
  } catch (const crypto::CryptoError& e) {
    throw ProtocolError(Failure::kDecryptFailure, e.what());
  } catch (const FormatError& e) {
    throw ProtocolError(Failure::kDecryptFailure, e.what());
  }
}

model::ModelArtifact parse_model(ByteView bytes) {
  try {
    return model::load_model(bytes);
  } catch (const FormatError& e) {
    throw ProtocolError(Failure::kMalformedMessage, std::string("model: ") + e.what());
  }
}

void expect(const Digest& got, const Digest& want, Failure f, const std::string& what) {
  if (got != want) throw ProtocolError(f, what + " digest mismatch");
}

std::unique_ptr<EnclaveSession> boot(Setup& setup, const RunOptions& opts) {
  auto s = EnclaveSession::boot(setup.image, setup.backend);
  if (opts.on_boot) opts.on_boot(*s);
  return s;
}

Bytes encode_request(const std::string& prompt, const model::SamplingParams& p) {
  ByteWriter w;
  w.raw(std::string_view("AAREQ1"));
  w.str(prompt);
  w.u32(p.context_size);
  w.u32(p.n_len);
  w.u64(p.seed);
  w.f64(p.temp);
  w.f64(p.top_p);
  return std::move(w).take();
}

std::pair<std::string, model::SamplingParams> decode_request(ByteView b) {
  try {
    ByteReader r(b);
    r.expect_magic("AAREQ1");
    auto prompt = r.str();
    model::SamplingParams p;
    p.context_size = r.u32();
    p.n_len = r.u32();
    p.seed = r.u64();
    p.temp = r.f64();
    p.top_p = r.f64();
    r.expect_end();
    p.validate();
    return {std::move(prompt), p};
  } catch (const std::exception& e) {
    throw ProtocolError(Failure::kMalformedMessage, std::string("request: ") + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Bytes encode_image_registration(const EnclaveImage& image, std::string_view backend_id,
                                const PcrSet& pcrs) {
  ByteWriter w;
  w.raw(std::string_view("AAREG1"));
  w.str(image.label());
  w.str(backend_id);
  w.raw(pcrs.pcr0.view());
  w.raw(pcrs.pcr1.view());
  w.raw(pcrs.pcr2.view());
  return std::move(w).take();
}

std::uint64_t register_image(translog::LogStore& log, TrustedRegistry& registry,
                             const EnclaveImage& image, TeeBackend& backend) {
  const auto pcrs = backend.measure(image);
  registry.add_vendor(backend.id(), backend.vendor_key());
  registry.trust(pcrs, image.label());
  return log
      .publish(translog::EntryKind::kImageRegistration,
               encode_image_registration(image, backend.id(), pcrs))
      .first;
}

// ---------------------------------------------------------------------------

PrepareOutcome prepare(Setup& setup, ByteView model_bytes, int bits, const RunOptions& opts) {
  auto enclave = boot(setup, opts);
  Channel provider(Role::kProvider, opts.transcript, opts.tamper);

  const auto offer = offer_key(*enclave);
  send_offer(provider, offer);

  // Provider: only a verified enclave ever receives M.
  const auto key = accept_key(provider, Role::kProvider, setup.registry);
  SymmetricKey k;
  send_sealed(provider, Role::kProvider, key, model_bytes, k);

  // Enclave.
  const auto h = receive_sealed(provider, *enclave, offer.doc);
  const auto m_bytes = enclave->payload(h);
  auto m = parse_model(m_bytes);
  if (m.precision != model::Precision::kF32) {
    throw ProtocolError(Failure::kMalformedMessage, "prepare expects an f32 model");
  }
  model::ModelArtifact mq;
  try {
    mq = model::quantize(m, bits);
  } catch (const model::QuantizeError& e) {
    throw ProtocolError(Failure::kMalformedMessage, e.what());
  }
  const auto h_m = crypto::hash(m_bytes);
  const auto mq_bytes = model::serialize(mq);
  const auto h_mq = crypto::hash(mq_bytes);
  enclave->hold(std::move(m));
  enclave->hold(std::move(mq));
  const auto doc = bind({{std::string(L::kModel), h_m}, {std::string(L::kQuantized), h_mq}},
                        *enclave)
                       .encode();
  const auto sealed = enclave->seal_reply(h, mq_bytes, crypto::hash(doc).view());
  const auto index = setup.log.publish(translog::EntryKind::kPrepareAttestation, doc).first;
  provider.send(Role::kEnclave, std::string(kAttestation), doc);
  provider.send(Role::kEnclave, std::string(kEnvelope), sealed.encode());
  enclave->terminate();

  // Provider.
  PrepareOutcome out;
  out.attestation = provider.receive(Role::kProvider, kAttestation).payload;
  const auto reply = provider.receive(Role::kProvider, kEnvelope);
  const auto view = party_verify(out.attestation, setup.registry);
  out.quantized_model = open_reply(reply, k, out.attestation);
  out.sealed_quantized = EncryptedEnvelope::decode(reply.payload);
  out.model_digest = crypto::hash(model_bytes);
  out.quantized_digest = crypto::hash(out.quantized_model);
  expect(bound(view, L::kModel), out.model_digest, Failure::kHashMismatch, "model");
  expect(bound(view, L::kQuantized), out.quantized_digest, Failure::kHashMismatch, "quantized");
  out.log_index = index;
  return out;
}

// ---------------------------------------------------------------------------

AuditOutcome attestable_audit(Setup& setup, ByteView quantized_model, ByteView bundle,
                              const RunOptions& opts) {
  auto enclave = boot(setup, opts);
  Channel provider(Role::kProvider, opts.transcript, opts.tamper);
  Channel auditor(Role::kAuditor, opts.transcript, opts.tamper);

  const auto offer = offer_key(*enclave);
  send_offer(provider, offer);
  send_offer(auditor, offer);

  // Each party verifies the enclave on its own and uses its own key.
  const auto key_p = accept_key(provider, Role::kProvider, setup.registry);
  const auto key_a = accept_key(auditor, Role::kAuditor, setup.registry);
  SymmetricKey k1, k2;
  send_sealed(provider, Role::kProvider, key_p, quantized_model, k1);
  send_sealed(auditor, Role::kAuditor, key_a, bundle, k2);

  // Enclave.
  const auto h1 = receive_sealed(provider, *enclave, offer.doc);
  const auto h2 = receive_sealed(auditor, *enclave, offer.doc);
  const auto mq_bytes = enclave->payload(h1);
  const auto ac_bytes = enclave->payload(h2);
  const auto h_mq = crypto::hash(mq_bytes);
  const auto h_ac = crypto::hash(ac_bytes);
  auto mq = enclave->hold(parse_model(mq_bytes));
  harness::AuditBundle b;
  try {
    b = harness::AuditBundle::decode(ac_bytes);
  } catch (const std::exception& e) {
    throw ProtocolError(Failure::kMalformedMessage, std::string("bundle: ") + e.what());
  }

  harness::AuditRun run;
  Bytes r_bytes;
  try {
    auto sandbox = enclave->create_sandbox(mq, b.descriptor.capabilities, b.descriptor.limits);
    r_bytes = sandbox.execute([&](Sandbox& s) {
      run = harness::run_audit(s, b);
      return to_bytes(run.result.encode());
    });
  } catch (const ResourceExceeded& e) {
    throw ProtocolError(Failure::kResourceExceeded, e.what());
  } catch (const AccessDenied& e) {
    throw ProtocolError(Failure::kAccessDenied, e.what());
  } catch (const model::PromptTooLong& e) {
    throw ProtocolError(Failure::kResourceExceeded, e.what());
  }
  const auto h_r = crypto::hash(r_bytes);
  const auto doc = bind({{std::string(L::kModel), h_mq},
                         {std::string(L::kAudit), h_ac},
                         {std::string(L::kResult), h_r}},
                        *enclave)
                       .encode();
  AuditOutcome out;
  out.result_index = setup.log.publish(translog::EntryKind::kAuditResult, r_bytes).first;
  out.attestation_index = setup.log.publish(translog::EntryKind::kAuditAttestation, doc).first;
  for (auto* ch : {&provider, &auditor}) {
    ch->send(Role::kEnclave, std::string(kAttestation), doc);
    ch->send(Role::kEnclave, std::string(kResult), r_bytes);
  }
  enclave->terminate();

  // Both parties check the digests they can compute themselves.
  for (auto [ch, role] : {std::pair{&provider, Role::kProvider}, std::pair{&auditor, Role::kAuditor}}) {
    const auto a = ch->receive(role, kAttestation).payload;
    const auto r = ch->receive(role, kResult).payload;
    const auto view = party_verify(a, setup.registry);
    expect(bound(view, L::kResult), crypto::hash(r), Failure::kHashMismatch, "result");
    if (role == Role::kProvider) {
      expect(bound(view, L::kModel), crypto::hash(quantized_model), Failure::kHashMismatch, "model");
    } else {
      expect(bound(view, L::kAudit), crypto::hash(bundle), Failure::kHashMismatch, "bundle");
    }
    out.attestation = a;
    out.result_bytes = r;
  }
  try {
    out.result = harness::AuditResult::decode(teeaudit::to_string(out.result_bytes));
  } catch (const FormatError& e) {
    throw ProtocolError(Failure::kMalformedMessage, e.what());
  }
  out.stats = run.stats;
  return out;
}

// ---------------------------------------------------------------------------

InferenceOutcome inference_session(Setup& setup, const InferenceRequest& req,
                                   const RunOptions& opts) {
  auto enclave = boot(setup, opts);
  Channel provider(Role::kProvider, opts.transcript, opts.tamper);
  Channel user(Role::kUser, opts.transcript, opts.tamper);

  const auto announced = req.announced_model.value_or(crypto::hash(req.model));
  provider.send(Role::kProvider, std::string(kModelRef), digest_bytes(announced));

  // Enclave: download the audit chain for the announced model.
  const auto ref = provider.receive(Role::kEnclave, kModelRef).payload;
  Digest expected;
  try {
    expected = Digest::from_bytes(ref);
  } catch (const crypto::CryptoError& e) {
    throw ProtocolError(Failure::kMalformedMessage, e.what());
  }
  const auto chains = find_audit_chains(setup.log, setup.registry, expected);
  if (chains.empty()) {
    throw ProtocolError(Failure::kNoAuditChain, "no audit for model " + expected.hex());
  }
  const auto& chain = chains.front();
  std::vector<Binding> extra{{std::string(L::kModel), expected},
                             {std::string(L::kAuditAttestation), crypto::hash(chain.audit_entry.payload)},
                             {std::string(L::kResult), chain.result}};
  if (chain.prepare_entry) {
    extra.push_back({std::string(L::kPrepareAttestation), crypto::hash(chain.prepare_entry->payload)});
  }
  const auto offer = offer_key(*enclave, extra);
  send_offer(provider, offer);
  send_offer(user, offer);

  // Provider loads the model.
  const auto key_p = accept_key(provider, Role::kProvider, setup.registry);
  SymmetricKey kp;
  send_sealed(provider, Role::kProvider, key_p, req.model, kp);

  // Enclave: the model must be the audited one before any prompt is accepted.
  const auto hm = receive_sealed(provider, *enclave, offer.doc);
  const auto m_bytes = enclave->payload(hm);
  const auto h_m = crypto::hash(m_bytes);
  if (h_m != expected) {
    throw ProtocolError(Failure::kModelHashMismatch,
                        "loaded " + h_m.hex() + ", attested " + expected.hex());
  }
  auto m = enclave->hold(parse_model(m_bytes));

  // User: verify the enclave, then send the prompt.
  const auto key_u = accept_key(user, Role::kUser, setup.registry);
  SymmetricKey ku;
  send_sealed(user, Role::kUser, key_u, encode_request(req.prompt, req.params), ku);

  // Enclave: generate inside a one-prompt sandbox.
  const auto hp = receive_sealed(user, *enclave, offer.doc);
  const auto [prompt, params] = decode_request(enclave->payload(hp));
  model::GenerationRecord rec;
  try {
    SandboxLimits limits;
    limits.max_prompts = 1;
    limits.max_output_tokens = params.n_len;
    auto sandbox = enclave->create_sandbox(
        m, {std::string(capability::kGenerate), std::string(capability::kTokenize)}, limits);
    sandbox.execute([&](Sandbox& s) {
      rec = s.generate(s.runtime().tokenizer().encode(prompt), params);
      return to_bytes(rec.output_text);
    });
  } catch (const ResourceExceeded& e) {
    throw ProtocolError(Failure::kResourceExceeded, e.what());
  } catch (const model::PromptTooLong& e) {
    throw ProtocolError(Failure::kResourceExceeded, e.what());
  }
  const auto doc = bind({{std::string(L::kModel), h_m},
                         {std::string(L::kPrompt), crypto::hash(prompt)},
                         {std::string(L::kOutput), crypto::hash(rec.output_text)},
                         {std::string(L::kResult), chain.result}},
                        *enclave)
                       .encode();
  const auto sealed = enclave->seal_reply(hp, to_bytes(rec.output_text), crypto::hash(doc).view());
  user.send(Role::kEnclave, std::string(kAttestation), doc);
  user.send(Role::kEnclave, std::string(kEnvelope), sealed.encode());
  enclave->terminate();

  // User.
  InferenceOutcome out;
  out.initial_attestation = key_u.doc;
  out.attestation = user.receive(Role::kUser, kAttestation).payload;
  const auto reply = user.receive(Role::kUser, kEnvelope);
  const auto view = party_verify(out.attestation, setup.registry);
  out.response = teeaudit::to_string(open_reply(reply, ku, out.attestation));
  expect(bound(view, L::kPrompt), crypto::hash(req.prompt), Failure::kHashMismatch, "prompt");
  expect(bound(view, L::kOutput), crypto::hash(out.response), Failure::kHashMismatch, "output");
  out.result = chain.r;
  out.record = rec;
  return out;
}

}  // namespace teeaudit::protocols
