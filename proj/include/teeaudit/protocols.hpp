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

#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "teeaudit/attestation.hpp"
#include "teeaudit/enclave.hpp"
#include "teeaudit/harness.hpp"
#include "teeaudit/model.hpp"
#include "teeaudit/translog.hpp"

namespace teeaudit::protocols {

enum class Role { kProvider, kAuditor, kUser, kRegulator, kEnclave };
std::string_view to_string(Role r);

enum class Failure {
  kAttestationRejected,
  kDecryptFailure,
  kHashMismatch,
  kModelHashMismatch,
  kResourceExceeded,
  kNoAuditChain,
  kMalformedMessage,
  kAccessDenied,
};
std::string_view to_string(Failure f);

/// A protocol run aborted. The enclave session has been terminated and
/// nothing further was published.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(Failure f, const std::string& detail);
  Failure failure() const noexcept { return failure_; }

 private:
  Failure failure_;
};

/// One transported message. Wire line: "<type> <base64 payload>".
struct Message {
  Role from = Role::kEnclave;
  Role to = Role::kEnclave;
  std::string type;
  Bytes payload;

  std::string line() const;
  static Message parse_line(std::string_view line, Role from, Role to);
};

/// Ordered record of every message exchanged in a run. Never holds keys.
class Transcript {
 public:
  void record(const Message& m) { messages_.push_back(m); }
  const std::vector<Message>& messages() const { return messages_; }
  /// Whether any payload contains `needle`.
  bool contains(ByteView needle) const;
  std::size_t count(std::string_view type) const;
  /// "<from>-><to> <type> <base64>" per line.
  std::string render() const;

 private:
  std::vector<Message> messages_;
};

/// Duplex link between one party and the enclave, carrying wire lines.
class Channel {
 public:
  Channel(Role party, Transcript* transcript, std::function<void(Message&)> tamper = {})
      : party_(party), transcript_(transcript), tamper_(std::move(tamper)) {}

  Role party() const { return party_; }
  void send(Role from, std::string type, Bytes payload);
  /// Next message addressed to `at`; throws ProtocolError(kMalformedMessage)
  /// when absent or of another type.
  Message receive(Role at, std::string_view type);

 private:
  Role party_;
  Transcript* transcript_;
  std::function<void(Message&)> tamper_;
  std::deque<std::string> to_enclave_, to_party_;
};

/// Everything a run needs besides the party inputs.
struct Setup {
  TeeBackend& backend;
  EnclaveImage image;
  TrustedRegistry registry;
  translog::LogStore& log;
};

struct RunOptions {
  Transcript* transcript = nullptr;
  /// Applied to each message in transit, keyed by the party end.
  std::function<void(Message&)> tamper;
  /// Called with the session right after boot.
  std::function<void(EnclaveSession&)> on_boot;
};

// ---------------------------------------------------------------------------
// Image registration

/// Payload of an ImageRegistration log entry.
Bytes encode_image_registration(const EnclaveImage& image, std::string_view backend_id,
                                const PcrSet& pcrs);
/// Adds the backend's vendor key and the image's PCRs to the registry and
/// publishes the registration. Returns the log index.
std::uint64_t register_image(translog::LogStore& log, TrustedRegistry& registry,
                             const EnclaveImage& image, TeeBackend& backend);

// ---------------------------------------------------------------------------
// Model preparation

struct PrepareOutcome {
  Bytes quantized_model;
  crypto::EncryptedEnvelope sealed_quantized;
  Bytes attestation;
  std::uint64_t log_index = 0;
  Digest model_digest;
  Digest quantized_digest;
};

/// Provider sends M, the enclave quantizes to `bits`, attests both digests,
/// publishes the attestation and returns M_q under the provider's key.
PrepareOutcome prepare(Setup& setup, ByteView model_bytes, int bits, const RunOptions& opts = {});

// ---------------------------------------------------------------------------
// Audit

struct AuditOutcome {
  harness::AuditResult result;
  Bytes result_bytes;
  Bytes attestation;
  std::uint64_t result_index = 0;
  std::uint64_t attestation_index = 0;
  /// Measurement only; not attested.
  harness::TokenStats stats;
};

/// Provider sends M_q and the auditor AC+AD under independent keys; the
/// enclave runs the audit in a sandbox, attests {model, audit, result}, and
/// publishes R and the attestation.
AuditOutcome attestable_audit(Setup& setup, ByteView quantized_model, ByteView bundle,
                              const RunOptions& opts = {});

// ---------------------------------------------------------------------------
// Inference

struct InferenceRequest {
  Bytes model;                             // M or M_q, held by the provider
  std::optional<Digest> announced_model;   // defaults to hash(model)
  std::string prompt;
  model::SamplingParams params = model::SamplingParams::classification();
};

struct InferenceOutcome {
  std::string response;
  Bytes attestation;          // A_{M,p->x,R}
  Bytes initial_attestation;  // key attestation carrying the audit chain
  harness::AuditResult result;
  model::GenerationRecord record;  // timing is measurement only
};

InferenceOutcome inference_session(Setup& setup, const InferenceRequest& req,
                                   const RunOptions& opts = {});

// ---------------------------------------------------------------------------
// Verification

enum class RejectReason {
  kNone,
  kMalformed,
  kUnknownBackend,
  kSignatureInvalid,
  kUntrustedImage,
  kRevokedImage,
  kMissingBinding,
  kPromptDigestMismatch,
  kOutputDigestMismatch,
  kModelDigestMismatch,
  kBundleDigestMismatch,
  kResultDigestMismatch,
  kNoAuditChain,
  kLogInconsistent,
};
std::string_view to_string(RejectReason r);

/// Where a model digest leads in the log.
struct AuditChain {
  Digest model;  // the provider's original M when a prepare entry links it
  std::optional<Digest> quantized;
  Digest audit;
  Digest result;
  std::optional<translog::LogEntry> prepare_entry;
  translog::LogEntry audit_entry;
  translog::LogEntry result_entry;
  harness::AuditResult r;
};

/// Audit chains for `model` (directly audited, or via a prepare attestation),
/// newest first. Only attestations that verify against `registry` count.
std::vector<AuditChain> find_audit_chains(translog::LogStore& log, const TrustedRegistry& registry,
                                          const Digest& model);

struct Verdict {
  bool verified = false;
  RejectReason reason = RejectReason::kNone;
  std::string detail;
  std::optional<AuditChain> chain;

  static Verdict reject(RejectReason r, std::string detail = {});
  /// "Verified" or "Rejected(<reason>)".
  std::string headline() const;
};

Verdict user_verify(std::string_view prompt, std::string_view response, ByteView doc,
                    translog::LogStore& log, const TrustedRegistry& registry);

/// Thresholds below which a verified disclosure is flagged.
struct RegulatorPolicy {
  std::optional<double> min_accuracy;
  std::optional<double> min_similarity;
  std::optional<double> max_toxic_rate;
};

struct RegulatorReport {
  Verdict verdict;
  bool audit_deficit = false;
  std::string deficit;
  /// Human-readable evidence listing digests, R and log indices.
  std::string render() const;
};

RegulatorReport regulator_check(std::string_view prompt, std::string_view response,
                                 ByteView doc, translog::LogStore& log,
                                 const TrustedRegistry& registry,
                                 const RegulatorPolicy& policy = {});

/// Every serialized artifact of one completed pipeline.
struct ChainArtifacts {
  Bytes model;
  Bytes quantized_model;
  Bytes bundle;
  Bytes result;
  Bytes prepare_attestation;
  Bytes audit_attestation;
  Bytes inference_attestation;
  Bytes prompt;
  Bytes response;
};

/// Offline recomputation of every digest link
/// M -> A_prep -> M_q -> A_audit -> R -> A_inference.
Verdict verify_binding_chain(const ChainArtifacts& a, const TrustedRegistry& registry);

}  // namespace teeaudit::protocols
