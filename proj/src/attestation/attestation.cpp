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

#include "teeaudit/attestation.hpp"

#include <json.hpp>
#include <sstream>

#include "teeaudit/enclave.hpp"

namespace teeaudit {

std::optional<Digest> AttestationDocument::find(std::string_view label) const {
  for (const auto& b : user_data) {
    if (b.label == label) return b.digest;
  }
  return std::nullopt;
}

Bytes canonical_encode(const AttestationDocument& doc) {
  ByteWriter w;
  w.raw(AttestationDocument::kMagic);
  w.str(doc.backend_id);
  w.raw(doc.pcrs.pcr0.view());
  w.raw(doc.pcrs.pcr1.view());
  w.raw(doc.pcrs.pcr2.view());
  w.u32(static_cast<std::uint32_t>(doc.user_data.size()));
  for (const auto& b : doc.user_data) {
    w.str(b.label);
    w.raw(b.digest.view());
  }
  return std::move(w).take();
}

Bytes AttestationDocument::encode() const {
  ByteWriter w;
  w.raw(canonical_encode(*this));
  w.blob(vendor_sig);
  return std::move(w).take();
}

AttestationDocument AttestationDocument::decode(ByteView bytes) {
  ByteReader r(bytes);
  r.expect_magic(kMagic);
  AttestationDocument doc;
  doc.backend_id = r.str();
  doc.pcrs.pcr0 = Digest::from_bytes(r.raw(Digest::kSize));
  doc.pcrs.pcr1 = Digest::from_bytes(r.raw(Digest::kSize));
  doc.pcrs.pcr2 = Digest::from_bytes(r.raw(Digest::kSize));
  const auto n = r.u32();
  if (n > r.remaining() / (4 + Digest::kSize)) r.fail("binding count exceeds input");
  std::set<std::string, std::less<>> seen;
  for (std::uint32_t i = 0; i < n; ++i) {
    Binding b;
    b.label = r.str();
    b.digest = Digest::from_bytes(r.raw(Digest::kSize));
    if (!seen.insert(b.label).second) r.fail("duplicate binding label '" + b.label + "'");
    doc.user_data.push_back(std::move(b));
  }
  const auto sig = r.blob();
  if (sig.size() != crypto::kSignatureSize) r.fail("signature must be 64 bytes");
  std::copy(sig.begin(), sig.end(), doc.vendor_sig.begin());
  r.expect_end();
  return doc;
}

std::string AttestationDocument::render_text() const {
  std::ostringstream os;
  os << "backend " << backend_id << '\n';
  os << "pcr0 " << pcrs.pcr0.hex() << '\n';
  os << "pcr1 " << pcrs.pcr1.hex() << '\n';
  os << "pcr2 " << pcrs.pcr2.hex() << '\n';
  for (const auto& b : user_data) os << b.label << ' ' << b.digest.hex() << '\n';
  os << "signature " << hex_encode(vendor_sig) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

void TrustedRegistry::add_vendor(std::string backend_id,
                                 const crypto::VerificationKey& vk) {
  vendors_[std::move(backend_id)] = vk;
}

void TrustedRegistry::trust(const PcrSet& pcrs, std::string label) {
  trusted_[pcrs] = std::move(label);
}

void TrustedRegistry::revoke(const PcrSet& pcrs) {
  if (!trusted_.contains(pcrs)) {
    throw std::invalid_argument("cannot revoke an image that was never trusted");
  }
  revoked_.insert(pcrs);
}

const crypto::VerificationKey* TrustedRegistry::vendor_key(
    std::string_view backend_id) const {
  auto it = vendors_.find(backend_id);
  return it == vendors_.end() ? nullptr : &it->second;
}

std::optional<std::string> TrustedRegistry::trusted_label(const PcrSet& pcrs) const {
  auto it = trusted_.find(pcrs);
  if (it == trusted_.end()) return std::nullopt;
  return it->second;
}

bool TrustedRegistry::is_revoked(const PcrSet& pcrs) const {
  return revoked_.contains(pcrs);
}

namespace {

nlohmann::json pcr_json(const PcrSet& p) {
  return {{"pcr0", p.pcr0.hex()}, {"pcr1", p.pcr1.hex()}, {"pcr2", p.pcr2.hex()}};
}

PcrSet pcr_from_json(const nlohmann::json& j) {
  return {Digest::from_hex(j.at("pcr0").get<std::string>()),
          Digest::from_hex(j.at("pcr1").get<std::string>()),
          Digest::from_hex(j.at("pcr2").get<std::string>())};
}

}  // namespace

std::string TrustedRegistry::to_json() const {
  nlohmann::json j;
  j["vendors"] = nlohmann::json::object();
  for (const auto& [id, vk] : vendors_) j["vendors"][id] = vk.hex();
  j["trusted"] = nlohmann::json::array();
  for (const auto& [pcrs, label] : trusted_) {
    auto e = pcr_json(pcrs);
    e["label"] = label;
    e["revoked"] = revoked_.contains(pcrs);
    j["trusted"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

TrustedRegistry TrustedRegistry::from_json(std::string_view text) {
  TrustedRegistry reg;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [id, hex] : j.at("vendors").items()) {
      reg.add_vendor(id, crypto::VerificationKey::from_bytes(
                             hex_decode(hex.get<std::string>())));
    }
    for (const auto& e : j.at("trusted")) {
      const auto pcrs = pcr_from_json(e);
      reg.trust(pcrs, e.at("label").get<std::string>());
      if (e.value("revoked", false)) reg.revoke(pcrs);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("registry: ") + e.what(), 0);
  }
  return reg;
}

// ---------------------------------------------------------------------------

std::string_view to_string(AttestationFailure f) {
  switch (f) {
    case AttestationFailure::kMalformed: return "MalformedDocument";
    case AttestationFailure::kUnknownBackend: return "UnknownBackend";
    case AttestationFailure::kSignatureInvalid: return "SignatureInvalid";
    case AttestationFailure::kUntrustedImage: return "UntrustedImage";
    case AttestationFailure::kRevokedImage: return "RevokedImage";
  }
  return "Unknown";
}

AttestationError::AttestationError(AttestationFailure f, const std::string& detail)
    : std::runtime_error(std::string(to_string(f)) + (detail.empty() ? "" : ": " + detail)),
      failure_(f) {}

std::optional<Digest> VerifiedAttestation::find(std::string_view label) const {
  for (const auto& b : bindings) {
    if (b.label == label) return b.digest;
  }
  return std::nullopt;
}

const Digest& VerifiedAttestation::at(std::string_view label) const {
  for (const auto& b : bindings) {
    if (b.label == label) return b.digest;
  }
  throw std::out_of_range("attestation does not bind '" + std::string(label) + "'");
}

VerifiedAttestation verify_attestation(const AttestationDocument& doc,
                                       const TrustedRegistry& registry) {
  const auto* vk = registry.vendor_key(doc.backend_id);
  if (!vk) throw AttestationError(AttestationFailure::kUnknownBackend, doc.backend_id);
  if (!crypto::verify(*vk, canonical_encode(doc), doc.vendor_sig)) {
    throw AttestationError(AttestationFailure::kSignatureInvalid);
  }
  auto label = registry.trusted_label(doc.pcrs);
  if (!label) throw AttestationError(AttestationFailure::kUntrustedImage);
  if (registry.is_revoked(doc.pcrs)) {
    throw AttestationError(AttestationFailure::kRevokedImage, *label);
  }
  return {doc.backend_id, *label, doc.pcrs, doc.user_data};
}

VerifiedAttestation verify_attestation(ByteView doc_bytes,
                                       const TrustedRegistry& registry) {
  AttestationDocument doc;
  try {
    doc = AttestationDocument::decode(doc_bytes);
  } catch (const FormatError& e) {
    throw AttestationError(AttestationFailure::kMalformed, e.what());
  } catch (const crypto::MalformedInput& e) {
    throw AttestationError(AttestationFailure::kMalformed, e.what());
  }
  return verify_attestation(doc, registry);
}

AttestationDocument bind(const std::map<std::string, Digest, std::less<>>& digests,
                         EnclaveSession& session) {
  std::vector<Binding> user_data;
  user_data.reserve(digests.size());
  for (const auto& [label, d] : digests) user_data.push_back({label, d});
  return session.attest(user_data);
}

}  // namespace teeaudit
