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

#include "teeaudit/protocols.hpp"

namespace teeaudit::protocols {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kProvider: return "provider";
    case Role::kAuditor: return "auditor";
    case Role::kUser: return "user";
    case Role::kRegulator: return "regulator";
    case Role::kEnclave: return "enclave";
  }
  return "?";
}

std::string_view to_string(Failure f) {
  switch (f) {
    case Failure::kAttestationRejected: return "AttestationRejected";
    case Failure::kDecryptFailure: return "DecryptFailure";
    case Failure::kHashMismatch: return "HashMismatch";
    case Failure::kModelHashMismatch: return "ModelHashMismatch";
    case Failure::kResourceExceeded: return "ResourceExceeded";
    case Failure::kNoAuditChain: return "NoAuditChain";
    case Failure::kMalformedMessage: return "MalformedMessage";
    case Failure::kAccessDenied: return "AccessDenied";
  }
  return "?";
}

ProtocolError::ProtocolError(Failure f, const std::string& detail)
    : std::runtime_error(std::string(to_string(f)) + (detail.empty() ? "" : ": " + detail)),
      failure_(f) {}

std::string Message::line() const { return type + " " + base64_encode(payload); }

Message Message::parse_line(std::string_view line, Role from, Role to) {
  const auto sp = line.find(' ');
  if (sp == std::string_view::npos || sp == 0) {
    throw ProtocolError(Failure::kMalformedMessage, "message line lacks a type");
  }
  Message m;
  m.from = from;
  m.to = to;
  m.type = std::string(line.substr(0, sp));
  try {
    m.payload = base64_decode(line.substr(sp + 1));
  } catch (const FormatError& e) {
    throw ProtocolError(Failure::kMalformedMessage, e.what());
  }
  return m;
}

bool Transcript::contains(ByteView needle) const {
  return std::any_of(messages_.begin(), messages_.end(), [&](const Message& m) {
    return std::search(m.payload.begin(), m.payload.end(), needle.begin(), needle.end()) !=
           m.payload.end();
  });
}

std::size_t Transcript::count(std::string_view type) const {
  return static_cast<std::size_t>(std::count_if(
      messages_.begin(), messages_.end(), [&](const Message& m) { return m.type == type; }));
}

std::string Transcript::render() const {
  std::string out;
  for (const auto& m : messages_) {
    out += std::string(to_string(m.from)) + "->" + std::string(to_string(m.to)) + " " + m.line() +
           "\n";
  }
  return out;
}

void Channel::send(Role from, std::string type, Bytes payload) {
  Message m{from, from == Role::kEnclave ? party_ : Role::kEnclave, std::move(type),
            std::move(payload)};
  if (tamper_) tamper_(m);
  if (transcript_) transcript_->record(m);
  (from == Role::kEnclave ? to_party_ : to_enclave_).push_back(m.line());
}

Message Channel::receive(Role at, std::string_view type) {
  auto& q = at == Role::kEnclave ? to_enclave_ : to_party_;
  if (q.empty()) {
    throw ProtocolError(Failure::kMalformedMessage, "expected '" + std::string(type) + "', got nothing");
  }
  const auto line = std::move(q.front());
  q.pop_front();
  const Role from = at == Role::kEnclave ? party_ : Role::kEnclave;
  auto m = Message::parse_line(line, from, at);
  if (m.type != type) {
    throw ProtocolError(Failure::kMalformedMessage,
                        "expected '" + std::string(type) + "', got '" + m.type + "'");
  }
  return m;
}

}  // namespace teeaudit::protocols
