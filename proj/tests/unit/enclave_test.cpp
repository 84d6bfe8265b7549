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
#include <thread>

#include "teeaudit/attestation.hpp"
#include "teeaudit/enclave.hpp"
#include "teeaudit/toy_model.hpp"

namespace teeaudit {
namespace {

const EnclaveImage kImage{"teeaudit-enclave", to_bytes("profile=test")};

bool all_zero(std::span<const std::uint8_t> b) {
  return std::all_of(b.begin(), b.end(), [](std::uint8_t x) { return x == 0; });
}

// -- image -------------------------------------------------------------------

TEST(Image, EncodeDecodeAndMeasure) {
  const auto bytes = kImage.encode();
  EXPECT_EQ(EnclaveImage::decode(bytes), kImage);
  const auto pcrs = measure_image(kImage, "sim-tee-v1");
  EXPECT_EQ(pcrs.pcr0, crypto::hash(bytes));
  EXPECT_EQ(pcrs.pcr1, crypto::hash(kImage.config));
  EXPECT_EQ(pcrs, measure_image(EnclaveImage::decode(bytes), "sim-tee-v1"));
  EXPECT_NE(pcrs.pcr2, measure_image(kImage, "other-tee").pcr2);
  auto changed = kImage;
  changed.config.push_back('!');
  EXPECT_NE(measure_image(changed, "sim-tee-v1").pcr0, pcrs.pcr0);
  EXPECT_THROW(EnclaveImage::decode(ByteView(bytes).first(bytes.size() - 1)), FormatError);
  EXPECT_THROW(EnclaveImage::decode(EnclaveImage{"", {}}.encode()), FormatError);
}

// -- lifecycle ---------------------------------------------------------------

TEST(Enclave, BootFailsWhenBackendUnavailable) {
  SimulatedBackend b;
  b.set_available(false);
  EXPECT_THROW(EnclaveSession::boot(kImage, b), BackendUnavailable);
}

TEST(Enclave, StagesMoveForwardOnly) {
  SimulatedBackend b("sim-tee-v1", 1);
  auto s = EnclaveSession::boot(kImage, b);
  EXPECT_EQ(s->stage(), Stage::kBooted);
  EXPECT_EQ(s->pcrs(), b.measure(kImage));
  EXPECT_THROW(s->public_key(), LifecycleError);
  EXPECT_THROW(s->hold(model::build_toy_model()), LifecycleError);
  s->generate_keypair();
  EXPECT_EQ(s->stage(), Stage::kKeyed);
  EXPECT_THROW(s->generate_keypair(), LifecycleError);
  auto m = s->hold(model::build_toy_model());
  EXPECT_EQ(s->stage(), Stage::kLoaded);
  auto box = s->create_sandbox(m, {std::string(capability::kGenerate)});
  box.execute([](Sandbox&) { return Bytes{1}; });
  EXPECT_EQ(s->stage(), Stage::kExecuted);
  EXPECT_THROW(box.execute([](Sandbox&) { return Bytes{}; }), LifecycleError);
  EXPECT_THROW(s->hold(model::build_toy_model()), LifecycleError);
  s->terminate();
  EXPECT_EQ(s->stage(), Stage::kTerminated);
  EXPECT_THROW(s->attest({}), LifecycleError);
  EXPECT_NO_THROW(s->terminate());
}

TEST(Enclave, ReceiveDecryptsOnlyForItsKey) {
  SimulatedBackend b("sim-tee-v1", 2);
  auto s = EnclaveSession::boot(kImage, b);
  crypto::SeededRandom rng(3);
  EXPECT_THROW(s->receive(crypto::EncryptedEnvelope{}), LifecycleError);
  const auto pk = s->generate_keypair();
  crypto::SymmetricKey k;
  const auto env = crypto::seal_to(pk, as_bytes("secret"), as_bytes("ad"), rng, &k);
  const auto h = s->receive(env);
  EXPECT_EQ(to_string(s->payload(h)), "secret");
  const auto reply = s->seal_reply(h, as_bytes("answer"), as_bytes("ad2"));
  EXPECT_EQ(to_string(crypto::open_with(k, reply)), "answer");

  auto other = EnclaveSession::boot(kImage, b);
  other->generate_keypair();
  EXPECT_THROW(other->receive(env), crypto::AuthenticationFailure);
}

TEST(Enclave, TerminateZeroizesEverySecret) {
  SimulatedBackend b("sim-tee-v1", 4);
  std::size_t buffers_seen = 0;
  bool all_wiped = true;
  b.on_zeroize = [&](std::span<const std::uint8_t> buf) {
    ++buffers_seen;
    all_wiped = all_wiped && all_zero(buf);
  };
  auto s = EnclaveSession::boot(kImage, b);
  crypto::SeededRandom rng(5);
  const auto pk = s->generate_keypair();
  s->receive(crypto::seal_to(pk, as_bytes("model bytes"), {}, rng));
  s->receive(crypto::seal_to(pk, as_bytes("bundle bytes"), {}, rng));
  auto m = s->hold(model::build_toy_model());
  EXPECT_EQ(s->held_buffers(), 2u);
  EXPECT_EQ(s->held_artifacts(), 1u);
  s.reset();  // destructor terminates
  // Secret key, two session keys, two buffers, 5 tensors x (values, levels).
  EXPECT_EQ(buffers_seen, 1u + 2u + 2u + 10u);
  EXPECT_TRUE(all_wiped);
  EXPECT_TRUE(all_zero({reinterpret_cast<const std::uint8_t*>(m->tensors[0].values.data()),
                        m->tensors[0].values.size() * sizeof(float)}));
  EXPECT_GT(b.zeroized_bytes(), 32u + 64u);
}

// -- sandbox -----------------------------------------------------------------

struct Loaded {
  SimulatedBackend backend{"sim-tee-v1", 6};
  std::unique_ptr<EnclaveSession> session = EnclaveSession::boot(kImage, backend);
  std::shared_ptr<const model::ModelArtifact> model;
  Loaded() {
    session->generate_keypair();
    model = session->hold(model::build_toy_model());
  }
};

TEST(Sandbox, CapabilitiesAreEnforced) {
  Loaded l;
  EXPECT_THROW(l.session->create_sandbox(l.model, {"net.connect"}), AccessDenied);
  auto box = l.session->create_sandbox(l.model, {std::string(capability::kEmbed)});
  EXPECT_NO_THROW(box.require(capability::kEmbed));
  EXPECT_THROW(box.require(capability::kClassify), AccessDenied);
  EXPECT_THROW(box.generate(std::vector<std::int32_t>{0}, model::SamplingParams::classification()),
               AccessDenied);
  EXPECT_THROW(l.session->create_sandbox(nullptr, {}), std::invalid_argument);
}

TEST(Sandbox, OutputTokenBudget) {
  Loaded l;
  SandboxLimits lim;
  lim.max_output_tokens = 3;
  auto box = l.session->create_sandbox(l.model, {std::string(capability::kGenerate)}, lim);
  auto p = model::SamplingParams::summarization();
  const auto prompt = l.model->vocabulary.size() > 10 ? std::vector<std::int32_t>{10, 11}
                                                       : std::vector<std::int32_t>{0};
  EXPECT_THROW(box.generate(prompt, p), ResourceExceeded);
  EXPECT_EQ(box.tokens_used(), 3u);
}

TEST(Sandbox, PromptBudget) {
  Loaded l;
  SandboxLimits lim;
  lim.max_prompts = 1;
  auto box = l.session->create_sandbox(l.model, {std::string(capability::kGenerate)}, lim);
  auto p = model::SamplingParams::classification();
  p.n_len = 2;
  box.generate(std::vector<std::int32_t>{10}, p);
  EXPECT_THROW(box.generate(std::vector<std::int32_t>{10}, p), ResourceExceeded);
}

TEST(Sandbox, WallClockBudget) {
  Loaded l;
  SandboxLimits lim;
  lim.wall_clock = std::chrono::milliseconds(0);
  auto box = l.session->create_sandbox(l.model, {std::string(capability::kGenerate)}, lim);
  auto p = model::SamplingParams::classification();
  p.n_len = 4;
  EXPECT_THROW(box.execute([&](Sandbox& sb) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    sb.generate(std::vector<std::int32_t>{10}, p);
    return Bytes{};
  }),
               ResourceExceeded);
  EXPECT_EQ(l.session->stage(), Stage::kLoaded);
}

// -- attestation ---------------------------------------------------------------

struct Attesting {
  SimulatedBackend backend{"sim-tee-v1", 7};
  std::unique_ptr<EnclaveSession> session = EnclaveSession::boot(kImage, backend);
  TrustedRegistry registry;
  Attesting() {
    registry.add_vendor(backend.id(), backend.vendor_key());
    registry.trust(backend.measure(kImage), "test image");
  }
};

TEST(Attestation, BindsLabelsInOrderAndVerifies) {
  Attesting a;
  const auto doc = bind({{"result", crypto::hash("R")}, {"model", crypto::hash("M")}}, *a.session);
  ASSERT_EQ(doc.user_data.size(), 2u);
  EXPECT_EQ(doc.user_data[0].label, "model");
  const auto v = verify_attestation(doc.encode(), a.registry);
  EXPECT_EQ(v.image_label, "test image");
  EXPECT_EQ(v.at("result"), crypto::hash("R"));
  EXPECT_FALSE(v.find("prompt"));
  EXPECT_THROW(v.at("prompt"), std::out_of_range);
  EXPECT_EQ(AttestationDocument::decode(doc.encode()), doc);
  EXPECT_NE(doc.render_text().find("model " + crypto::hash("M").hex()), std::string::npos);
}

AttestationFailure failure_of(ByteView doc, const TrustedRegistry& reg) {
  try {
    verify_attestation(doc, reg);
  } catch (const AttestationError& e) {
    return e.failure();
  }
  ADD_FAILURE() << "document verified";
  return AttestationFailure::kMalformed;
}

TEST(Attestation, RejectionReasons) {
  Attesting a;
  const auto doc = bind({{"model", crypto::hash("M")}}, *a.session);

  auto forged = doc;
  forged.user_data[0].digest = crypto::hash("other");
  EXPECT_EQ(failure_of(forged.encode(), a.registry), AttestationFailure::kSignatureInvalid);

  // Self-signed with a key the registry does not hold for this backend.
  crypto::SeededRandom rng(8);
  const auto rogue = crypto::VendorKeyPair::generate(rng);
  auto self_signed = doc;
  self_signed.vendor_sig = rogue.sign(canonical_encode(self_signed));
  EXPECT_EQ(failure_of(self_signed.encode(), a.registry), AttestationFailure::kSignatureInvalid);

  auto unknown = doc;
  unknown.backend_id = "other-tee";
  EXPECT_EQ(failure_of(unknown.encode(), a.registry), AttestationFailure::kUnknownBackend);

  TrustedRegistry no_image;
  no_image.add_vendor(a.backend.id(), a.backend.vendor_key());
  EXPECT_EQ(failure_of(doc.encode(), no_image), AttestationFailure::kUntrustedImage);

  auto revoked = a.registry;
  revoked.revoke(a.backend.measure(kImage));
  EXPECT_EQ(failure_of(doc.encode(), revoked), AttestationFailure::kRevokedImage);

  auto bytes = doc.encode();
  bytes.pop_back();
  EXPECT_EQ(failure_of(bytes, a.registry), AttestationFailure::kMalformed);
}

TEST(Attestation, DuplicateLabelsRejected) {
  Attesting a;
  auto doc = a.session->attest({{"model", crypto::hash("a")}, {"model", crypto::hash("b")}});
  EXPECT_THROW(AttestationDocument::decode(doc.encode()), FormatError);
}

TEST(Attestation, EveryBitFlipIsRejected) {
  Attesting a;
  const auto bytes = bind({{"model", crypto::hash("M")}, {"result", crypto::hash("R")}},
                          *a.session).encode();
  for (std::size_t bit = 0; bit < bytes.size() * 8; ++bit) {
    auto b = bytes;
    b[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    EXPECT_THROW(verify_attestation(b, a.registry), AttestationError) << "bit " << bit;
  }
}

TEST(Registry, JsonRoundTripAndRevokeRules) {
  Attesting a;
  TrustedRegistry reg = a.registry;
  const auto pcrs = a.backend.measure(kImage);
  EXPECT_THROW(reg.revoke(measure_image(EnclaveImage{"x", {}}, "sim-tee-v1")), std::invalid_argument);
  reg.revoke(pcrs);
  const auto back = TrustedRegistry::from_json(reg.to_json());
  EXPECT_EQ(back.to_json(), reg.to_json());
  EXPECT_TRUE(back.is_revoked(pcrs));
  EXPECT_EQ(back.trusted_label(pcrs), "test image");
  ASSERT_NE(back.vendor_key("sim-tee-v1"), nullptr);
  EXPECT_EQ(*back.vendor_key("sim-tee-v1"), a.backend.vendor_key());
  EXPECT_THROW(TrustedRegistry::from_json("{not json"), FormatError);
}

TEST(Backend, SimulatedVendorKeyDependsOnId) {
  SimulatedBackend a("sim-tee-v1"), b("sim-tee-v1"), c("sim-tee-v2");
  EXPECT_EQ(a.vendor_key(), b.vendor_key());
  EXPECT_NE(a.vendor_key(), c.vendor_key());
  a.set_available(false);
  EXPECT_THROW(a.attest_sign(as_bytes("x")), BackendUnavailable);
}

}  // namespace
}  // namespace teeaudit
