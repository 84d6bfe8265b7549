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

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "teeaudit/attestation.hpp"
#include "teeaudit/crypto.hpp"
#include "teeaudit/image.hpp"
#include "teeaudit/model.hpp"

namespace teeaudit {

class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ResourceExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AccessDenied : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Platform services an enclave relies on.
class TeeBackend {
 public:
  virtual ~TeeBackend() = default;

  virtual const std::string& id() const = 0;
  virtual bool available() const = 0;
  virtual PcrSet measure(const EnclaveImage& image) const = 0;
  virtual crypto::Signature attest_sign(ByteView message) = 0;
  virtual crypto::VerificationKey vendor_key() const = 0;
  virtual crypto::RandomSource& secure_random() = 0;
  /// Overwrites the buffer with zeros.
  virtual void zeroize(std::span<std::uint8_t> buffer) = 0;
};

/// Deterministic software stand-in for a TEE. The vendor key is derived from
/// the backend id unless one is supplied; randomness is seeded on request.
class SimulatedBackend final : public TeeBackend {
 public:
  static constexpr std::string_view kDefaultId = "sim-tee-v1";

  explicit SimulatedBackend(std::string id = std::string(kDefaultId),
                            std::optional<std::uint64_t> seed = std::nullopt);
  SimulatedBackend(std::string id, crypto::VendorKeyPair vendor,
                   std::optional<std::uint64_t> seed = std::nullopt);

  /// The vendor key pair a simulated backend with this id uses by default.
  static crypto::VendorKeyPair default_vendor(std::string_view id);

  const std::string& id() const override { return id_; }
  bool available() const override { return available_; }
  void set_available(bool a) { available_ = a; }

  PcrSet measure(const EnclaveImage& image) const override;
  crypto::Signature attest_sign(ByteView message) override;
  crypto::VerificationKey vendor_key() const override { return vendor_.verification_key(); }
  crypto::RandomSource& secure_random() override { return *rng_; }
  void zeroize(std::span<std::uint8_t> buffer) override;

  /// Test hook: sees every buffer right after it was zeroized.
  std::function<void(std::span<const std::uint8_t>)> on_zeroize;
  std::size_t zeroized_bytes() const { return zeroized_; }

 private:
  std::string id_;
  crypto::VendorKeyPair vendor_;
  std::unique_ptr<crypto::RandomSource> rng_;
  bool available_ = true;
  std::size_t zeroized_ = 0;
};

enum class Stage { kBooted, kKeyed, kLoaded, kExecuted, kTerminated };
std::string_view to_string(Stage s);

/// Resource budget of one sandbox.
struct SandboxLimits {
  std::uint64_t max_output_tokens = 1u << 20;
  std::uint32_t max_prompts = 100000;
  std::chrono::milliseconds wall_clock{std::chrono::minutes(10)};

  bool operator==(const SandboxLimits&) const = default;
};

class EnclaveSession;

/// Capabilities audit code may request inside a sandbox.
namespace capability {
inline constexpr std::string_view kGenerate = "model.generate";
inline constexpr std::string_view kTokenize = "model.tokenize";
inline constexpr std::string_view kEmbed = "scorer.embed";
inline constexpr std::string_view kClassify = "scorer.classify";
bool permitted(std::string_view cap);
}  // namespace capability

/// Execution context bound to one model and one set of declared
/// capabilities. It holds no reference to session keys or attestations.
class Sandbox {
 public:
  const model::ModelArtifact& model() const { return *model_; }
  const model::Runtime& runtime() const { return *runtime_; }
  const SandboxLimits& limits() const { return limits_; }
  const std::vector<std::string>& capabilities() const { return caps_; }

  /// Throws AccessDenied unless `cap` was declared and is permitted.
  void require(std::string_view cap) const;

  /// Generation under the budget; the output may not exceed what remains.
  model::GenerationRecord generate(std::span<const std::int32_t> prompt,
                                   const model::SamplingParams& params);

  std::uint64_t tokens_used() const { return tokens_used_; }
  std::uint32_t prompts_used() const { return prompts_used_; }

  /// Runs `work` and returns its declared output. Any exception propagates and
  /// nothing else leaves the sandbox. Moves the session to Executed on success.
  Bytes execute(const std::function<Bytes(Sandbox&)>& work);

 private:
  friend class EnclaveSession;
  Sandbox(EnclaveSession& session, std::shared_ptr<const model::ModelArtifact> m,
          std::vector<std::string> caps, SandboxLimits limits);
  void check_clock() const;

  EnclaveSession* session_;
  std::shared_ptr<const model::ModelArtifact> model_;
  std::unique_ptr<model::Runtime> runtime_;
  std::vector<std::string> caps_;
  SandboxLimits limits_;
  std::uint64_t tokens_used_ = 0;
  std::uint32_t prompts_used_ = 0;
  std::chrono::steady_clock::time_point started_{};
  bool running_ = false;
};

/// A booted enclave. All state is volatile and wiped by terminate().
/// Stages move forward only: Booted -> Keyed -> Loaded -> Executed -> Terminated.
class EnclaveSession {
 public:
  /// Throws BackendUnavailable.
  static std::unique_ptr<EnclaveSession> boot(const EnclaveImage& image, TeeBackend& backend);
  ~EnclaveSession();
  EnclaveSession(const EnclaveSession&) = delete;
  EnclaveSession& operator=(const EnclaveSession&) = delete;

  Stage stage() const { return stage_; }
  const PcrSet& pcrs() const { return pcrs_; }
  const std::string& backend_id() const { return backend_->id(); }
  const EnclaveImage& image() const { return image_; }

  /// Booted -> Keyed.
  const crypto::KemPublicKey& generate_keypair();
  const crypto::KemPublicKey& public_key() const;

  /// Any stage before Terminated.
  AttestationDocument attest(const std::vector<Binding>& user_data);

  /// Decapsulates and decrypts an inbound envelope (Keyed or Loaded). The
  /// plaintext stays in the session; the returned handle names it.
  std::size_t receive(const crypto::EncryptedEnvelope& env);
  ByteView payload(std::size_t handle) const;
  /// Encrypts a reply under the symmetric key that arrived with `handle`.
  crypto::EncryptedEnvelope seal_reply(std::size_t handle, ByteView plaintext, ByteView aad);

  /// Keeps a parsed artifact in session memory. Keyed -> Loaded on first call.
  std::shared_ptr<const model::ModelArtifact> hold(model::ModelArtifact m);

  /// Requires Loaded. Undeclared or forbidden capabilities raise AccessDenied.
  Sandbox create_sandbox(std::shared_ptr<const model::ModelArtifact> m,
                         std::vector<std::string> capabilities, SandboxLimits limits = {});

  crypto::RandomSource& random();

  /// Wipes all volatile state. Idempotent.
  void terminate();

  std::size_t held_buffers() const { return buffers_.size(); }
  std::size_t held_artifacts() const { return artifacts_.size(); }

 private:
  friend class Sandbox;
  EnclaveSession(const EnclaveImage& image, TeeBackend& backend);
  void require_live(std::string_view op) const;
  void advance(Stage to);
  void mark_executed();

  EnclaveImage image_;
  TeeBackend* backend_;
  PcrSet pcrs_;
  Stage stage_ = Stage::kBooted;
  std::optional<crypto::KemKeyPair> keys_;
  std::vector<crypto::SymmetricKey> session_keys_;
  std::vector<Bytes> buffers_;
  std::vector<std::shared_ptr<model::ModelArtifact>> artifacts_;
};

}  // namespace teeaudit
