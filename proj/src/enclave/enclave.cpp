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

#include "teeaudit/enclave.hpp"

#include <algorithm>

#include <sodium.h>

namespace teeaudit {

crypto::VendorKeyPair SimulatedBackend::default_vendor(std::string_view id) {
  const auto seed = crypto::hash("teeaudit-simulated-vendor:" + std::string(id));
  return crypto::VendorKeyPair::from_seed(seed.view());
}

SimulatedBackend::SimulatedBackend(std::string id, std::optional<std::uint64_t> seed)
    : SimulatedBackend(id, default_vendor(id), seed) {}

SimulatedBackend::SimulatedBackend(std::string id, crypto::VendorKeyPair vendor,
                                   std::optional<std::uint64_t> seed)
    : id_(std::move(id)), vendor_(std::move(vendor)) {
  if (seed) {
    rng_ = std::make_unique<crypto::SeededRandom>(*seed);
  } else {
    rng_ = std::make_unique<crypto::SystemRandom>();
  }
}

PcrSet SimulatedBackend::measure(const EnclaveImage& image) const {
  return measure_image(image, id_);
}

crypto::Signature SimulatedBackend::attest_sign(ByteView message) {
  if (!available_) throw BackendUnavailable("backend " + id_ + " is unavailable");
  return vendor_.sign(message);
}

void SimulatedBackend::zeroize(std::span<std::uint8_t> buffer) {
  sodium_memzero(buffer.data(), buffer.size());
  zeroized_ += buffer.size();
  if (on_zeroize) on_zeroize(buffer);
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kBooted: return "Booted";
    case Stage::kKeyed: return "Keyed";
    case Stage::kLoaded: return "Loaded";
    case Stage::kExecuted: return "Executed";
    case Stage::kTerminated: return "Terminated";
  }
  return "?";
}

namespace capability {
bool permitted(std::string_view cap) {
  return cap == kGenerate || cap == kTokenize || cap == kEmbed || cap == kClassify;
}
}  // namespace capability

// ---------------------------------------------------------------------------

Sandbox::Sandbox(EnclaveSession& session, std::shared_ptr<const model::ModelArtifact> m,
                 std::vector<std::string> caps, SandboxLimits limits)
    : session_(&session),
      model_(std::move(m)),
      runtime_(std::make_unique<model::Runtime>(*model_)),
      caps_(std::move(caps)),
      limits_(limits) {}

void Sandbox::require(std::string_view cap) const {
  if (!capability::permitted(cap) ||
      std::find(caps_.begin(), caps_.end(), cap) == caps_.end()) {
    throw AccessDenied("sandbox capability denied: " + std::string(cap));
  }
}

void Sandbox::check_clock() const {
  if (running_ && std::chrono::steady_clock::now() - started_ > limits_.wall_clock) {
    throw ResourceExceeded("sandbox wall-clock budget exhausted");
  }
}

model::GenerationRecord Sandbox::generate(std::span<const std::int32_t> prompt,
                                          const model::SamplingParams& params) {
  require(capability::kGenerate);
  session_->require_live("sandbox generate");
  check_clock();
  if (prompts_used_ >= limits_.max_prompts) {
    throw ResourceExceeded("sandbox prompt budget exhausted");
  }
  const auto remaining = limits_.max_output_tokens - tokens_used_;
  auto capped = params;
  if (remaining < capped.n_len) capped.n_len = static_cast<std::uint32_t>(remaining + 1);
  auto rec = model::generate(*runtime_, prompt, capped);
  ++prompts_used_;
  if (rec.output_tokens > remaining) {
    tokens_used_ = limits_.max_output_tokens;
    throw ResourceExceeded("sandbox output-token budget exhausted");
  }
  tokens_used_ += rec.output_tokens;
  check_clock();
  return rec;
}

Bytes Sandbox::execute(const std::function<Bytes(Sandbox&)>& work) {
  session_->require_live("sandbox execute");
  if (session_->stage() != Stage::kLoaded) {
    throw LifecycleError("sandbox execute requires a Loaded session, not " +
                         std::string(to_string(session_->stage())));
  }
  started_ = std::chrono::steady_clock::now();
  running_ = true;
  Bytes out;
  try {
    out = work(*this);
  } catch (...) {
    running_ = false;
    throw;
  }
  running_ = false;
  session_->mark_executed();
  return out;
}

// ---------------------------------------------------------------------------

EnclaveSession::EnclaveSession(const EnclaveImage& image, TeeBackend& backend)
    : image_(image), backend_(&backend), pcrs_(backend.measure(image)) {}

std::unique_ptr<EnclaveSession> EnclaveSession::boot(const EnclaveImage& image,
                                                     TeeBackend& backend) {
  if (!backend.available()) {
    throw BackendUnavailable("backend " + backend.id() + " is unavailable");
  }
  return std::unique_ptr<EnclaveSession>(new EnclaveSession(image, backend));
}

EnclaveSession::~EnclaveSession() { terminate(); }

void EnclaveSession::require_live(std::string_view op) const {
  if (stage_ == Stage::kTerminated) {
    throw LifecycleError(std::string(op) + " on a terminated session");
  }
}

void EnclaveSession::advance(Stage to) {
  if (to <= stage_) {
    throw LifecycleError("cannot move from " + std::string(to_string(stage_)) + " to " +
                         std::string(to_string(to)));
  }
  stage_ = to;
}

const crypto::KemPublicKey& EnclaveSession::generate_keypair() {
  require_live("generate_keypair");
  if (stage_ != Stage::kBooted) throw LifecycleError("keypair already generated");
  keys_ = crypto::kem_keygen(backend_->secure_random());
  advance(Stage::kKeyed);
  return keys_->public_key;
}

const crypto::KemPublicKey& EnclaveSession::public_key() const {
  require_live("public_key");
  if (!keys_) throw LifecycleError("no keypair generated");
  return keys_->public_key;
}

AttestationDocument EnclaveSession::attest(const std::vector<Binding>& user_data) {
  require_live("attest");
  AttestationDocument doc;
  doc.backend_id = backend_->id();
  doc.pcrs = pcrs_;
  doc.user_data = user_data;
  doc.vendor_sig = backend_->attest_sign(canonical_encode(doc));
  return doc;
}

std::size_t EnclaveSession::receive(const crypto::EncryptedEnvelope& env) {
  require_live("receive");
  if (stage_ != Stage::kKeyed && stage_ != Stage::kLoaded) {
    throw LifecycleError("receive requires a Keyed or Loaded session, not " +
                         std::string(to_string(stage_)));
  }
  auto k = crypto::kem_decapsulate(keys_->secret_key, env.kem_ciphertext);
  auto pt = crypto::open_with(k, env);
  session_keys_.push_back(std::move(k));
  buffers_.push_back(std::move(pt));
  return buffers_.size() - 1;
}

ByteView EnclaveSession::payload(std::size_t handle) const {
  require_live("payload");
  return buffers_.at(handle);
}

crypto::EncryptedEnvelope EnclaveSession::seal_reply(std::size_t handle, ByteView plaintext,
                                                     ByteView aad) {
  require_live("seal_reply");
  return crypto::seal_with(session_keys_.at(handle), plaintext, aad,
                           backend_->secure_random());
}

std::shared_ptr<const model::ModelArtifact> EnclaveSession::hold(model::ModelArtifact m) {
  require_live("hold");
  if (stage_ == Stage::kKeyed) {
    advance(Stage::kLoaded);
  } else if (stage_ != Stage::kLoaded) {
    throw LifecycleError("artifacts load after keying, before execution");
  }
  artifacts_.push_back(std::make_shared<model::ModelArtifact>(std::move(m)));
  return artifacts_.back();
}

Sandbox EnclaveSession::create_sandbox(std::shared_ptr<const model::ModelArtifact> m,
                                       std::vector<std::string> capabilities,
                                       SandboxLimits limits) {
  require_live("create_sandbox");
  if (stage_ != Stage::kLoaded) {
    throw LifecycleError("create_sandbox requires a Loaded session, not " +
                         std::string(to_string(stage_)));
  }
  if (!m) throw std::invalid_argument("create_sandbox: no model");
  model::validate(*m);
  for (const auto& c : capabilities) {
    if (!capability::permitted(c)) throw AccessDenied("sandbox capability denied: " + c);
  }
  return Sandbox(*this, std::move(m), std::move(capabilities), limits);
}

void EnclaveSession::mark_executed() { advance(Stage::kExecuted); }

crypto::RandomSource& EnclaveSession::random() {
  require_live("random");
  return backend_->secure_random();
}

namespace {
template <class T>
std::span<std::uint8_t> raw(std::vector<T>& v) {
  return {reinterpret_cast<std::uint8_t*>(v.data()), v.size() * sizeof(T)};
}
}  // namespace

void EnclaveSession::terminate() {
  if (stage_ == Stage::kTerminated) return;
  if (keys_) {
    backend_->zeroize(keys_->secret_key.mutable_view());
    keys_.reset();
  }
  for (auto& k : session_keys_) backend_->zeroize(k.mutable_view());
  session_keys_.clear();
  for (auto& b : buffers_) backend_->zeroize(b);
  buffers_.clear();
  for (auto& a : artifacts_) {
    for (auto& t : a->tensors) {
      backend_->zeroize(raw(t.values));
      backend_->zeroize(raw(t.levels));
    }
    a->rules.clear();
    a->vocabulary.clear();
  }
  artifacts_.clear();
  stage_ = Stage::kTerminated;
}

}  // namespace teeaudit
