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

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "teeaudit/crypto.hpp"
#include "teeaudit/image.hpp"

namespace teeaudit {

class EnclaveSession;

/// One labeled 32-byte value bound into an attestation.
struct Binding {
  std::string label;
  Digest digest;
  bool operator==(const Binding&) const = default;
};

// Labels used by the protocols.
namespace labels {
inline constexpr std::string_view kKemPublicKey = "kem_pk";
inline constexpr std::string_view kModel = "model";
inline constexpr std::string_view kQuantized = "quantized";
inline constexpr std::string_view kAudit = "audit";
inline constexpr std::string_view kResult = "result";
inline constexpr std::string_view kPrompt = "prompt";
inline constexpr std::string_view kOutput = "output";
inline constexpr std::string_view kPrepareAttestation = "prepare_attestation";
inline constexpr std::string_view kAuditAttestation = "audit_attestation";
}  // namespace labels

/// (user data, PCRs, vendor signature). The signature covers
/// canonical_encode(), i.e. everything except itself.
struct AttestationDocument {
  static constexpr std::string_view kMagic = "AADOC1";

  std::string backend_id;
  PcrSet pcrs;
  std::vector<Binding> user_data;
  crypto::Signature vendor_sig{};

  std::optional<Digest> find(std::string_view label) const;

  /// Full wire form: canonical payload followed by the length-prefixed signature.
  Bytes encode() const;
  /// Throws FormatError. Duplicate labels are rejected.
  static AttestationDocument decode(ByteView bytes);
  /// One labeled digest per line, hex. For display only.
  std::string render_text() const;

  bool operator==(const AttestationDocument&) const = default;
};

/// The signed portion of a document.
Bytes canonical_encode(const AttestationDocument& doc);

/// Vendor keys, trusted images, and revocations a verifier relies on.
class TrustedRegistry {
 public:
  void add_vendor(std::string backend_id, const crypto::VerificationKey& vk);
  void trust(const PcrSet& pcrs, std::string label);
  /// Revoking an image that was never trusted is an error.
  void revoke(const PcrSet& pcrs);

  const crypto::VerificationKey* vendor_key(std::string_view backend_id) const;
  std::optional<std::string> trusted_label(const PcrSet& pcrs) const;
  bool is_revoked(const PcrSet& pcrs) const;

  std::string to_json() const;
  static TrustedRegistry from_json(std::string_view text);

 private:
  std::map<std::string, crypto::VerificationKey, std::less<>> vendors_;
  std::map<PcrSet, std::string> trusted_;
  std::set<PcrSet> revoked_;
};

enum class AttestationFailure {
  kMalformed,
  kUnknownBackend,
  kSignatureInvalid,
  kUntrustedImage,
  kRevokedImage,
};

std::string_view to_string(AttestationFailure f);

class AttestationError : public std::runtime_error {
 public:
  explicit AttestationError(AttestationFailure f, const std::string& detail = {});
  AttestationFailure failure() const noexcept { return failure_; }

 private:
  AttestationFailure failure_;
};

/// The view a verifier obtains after all checks pass.
struct VerifiedAttestation {
  std::string backend_id;
  std::string image_label;
  PcrSet pcrs;
  std::vector<Binding> bindings;

  std::optional<Digest> find(std::string_view label) const;
  /// Throws std::out_of_range when the label is not bound.
  const Digest& at(std::string_view label) const;
};

/// Signature first, then trusted membership, then revocation.
VerifiedAttestation verify_attestation(const AttestationDocument& doc,
                                       const TrustedRegistry& registry);
/// Decoding failures surface as AttestationFailure::kMalformed.
VerifiedAttestation verify_attestation(ByteView doc_bytes,
                                       const TrustedRegistry& registry);

/// Attests a label map (bound in label order) from inside `session`.
AttestationDocument bind(const std::map<std::string, Digest, std::less<>>& digests,
                         EnclaveSession& session);

}  // namespace teeaudit
