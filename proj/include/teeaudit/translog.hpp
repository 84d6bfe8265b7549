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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "teeaudit/bytes.hpp"
#include "teeaudit/crypto.hpp"
#include "teeaudit/net.hpp"

namespace teeaudit::translog {

using crypto::Digest;

enum class EntryKind : std::uint8_t {
  kImageRegistration = 1,
  kPrepareAttestation = 2,
  kAuditResult = 3,
  kAuditAttestation = 4,
};
std::string_view to_string(EntryKind k);
std::optional<EntryKind> parse_kind(std::string_view s);

class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LogEntry {
  std::uint64_t index = 0;
  EntryKind kind = EntryKind::kImageRegistration;
  Bytes payload;
  Digest leaf_hash;

  bool operator==(const LogEntry&) const = default;
};

// RFC 6962 hashing.
Digest leaf_hash(ByteView payload);
Digest node_hash(const Digest& left, const Digest& right);
/// Root over leaf hashes; the empty tree hashes the empty string.
Digest merkle_root(std::span<const Digest> leaves);

enum class Side : std::uint8_t { kLeft, kRight };

/// Audit path from the leaf upwards; `side` is where the sibling sits.
struct InclusionProof {
  std::uint64_t index = 0;
  std::uint64_t tree_size = 0;
  std::vector<std::pair<Digest, Side>> path;

  /// "L:<hex>,R:<hex>,..." ("-" for an empty path).
  std::string path_text() const;
  static std::vector<std::pair<Digest, Side>> parse_path(std::string_view text);
  bool operator==(const InclusionProof&) const = default;
};

InclusionProof merkle_proof(std::span<const Digest> leaves, std::uint64_t index);
/// Also checks that the sides match the position implied by (index, tree_size).
bool verify_inclusion(const Digest& root, const Digest& leaf, const InclusionProof& proof);

/// What the protocols need from a log, local or remote.
class LogStore {
 public:
  virtual ~LogStore() = default;
  /// Throws std::invalid_argument on an empty payload, StorageError on I/O.
  virtual std::pair<std::uint64_t, Digest> publish(EntryKind kind, ByteView payload) = 0;
  virtual LogEntry get(std::uint64_t index) = 0;  // throws OutOfRange
  /// Entries whose payload contains the digest bytes or hashes to it.
  virtual std::vector<LogEntry> scan(const Digest& d) = 0;
  virtual std::uint64_t size() = 0;
  virtual Digest root() = 0;
  virtual InclusionProof prove(std::uint64_t index) = 0;  // throws OutOfRange
};

/// In-memory log, optionally backed by an append-only file of
/// [u32 length][u8 kind][payload] records. A torn trailing record left by a
/// crash is cut off when the file is reopened.
class TransparencyLog final : public LogStore {
 public:
  TransparencyLog() = default;
  explicit TransparencyLog(std::filesystem::path file);
  ~TransparencyLog() override;
  TransparencyLog(const TransparencyLog&) = delete;
  TransparencyLog& operator=(const TransparencyLog&) = delete;

  std::pair<std::uint64_t, Digest> publish(EntryKind kind, ByteView payload) override;
  LogEntry get(std::uint64_t index) override;
  std::vector<LogEntry> scan(const Digest& d) override;
  std::vector<LogEntry> scan(const std::function<bool(const LogEntry&)>& pred);
  std::uint64_t size() override;
  Digest root() override;
  InclusionProof prove(std::uint64_t index) override;

 private:
  void load();

  mutable std::shared_mutex mu_;
  std::vector<LogEntry> entries_;
  std::vector<Digest> leaves_;
  Digest root_ = merkle_root({});
  std::optional<std::filesystem::path> file_;
  int fd_ = -1;
};

/// Line protocol:
///   PUBLISH <kind> <base64>  -> OK <index> <leaf hex>
///   GET <index>              -> OK <index> <kind> <leaf hex> <base64>
///   SCAN <digest hex>        -> OK [i1,i2,...]
///   ROOT                     -> OK <size> <root hex>
///   PROVE <index>            -> OK <index> <size> <path>
/// Failures answer "ERR <code> <message>" with code range|request|storage.
std::string handle_request(LogStore& log, std::string_view line);

class LogService {
 public:
  LogService(LogStore& log, const net::Endpoint& listen);
  std::uint16_t port() const { return server_.port(); }
  void run() { server_.run(); }
  void start() { server_.start(); }
  void stop() { server_.stop(); }

 private:
  net::LineServer server_;
};

class RemoteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Client for LogService. Not thread-safe.
class RemoteLog final : public LogStore {
 public:
  explicit RemoteLog(const net::Endpoint& ep);

  std::pair<std::uint64_t, Digest> publish(EntryKind kind, ByteView payload) override;
  LogEntry get(std::uint64_t index) override;
  std::vector<LogEntry> scan(const Digest& d) override;
  std::uint64_t size() override;
  Digest root() override;
  InclusionProof prove(std::uint64_t index) override;

 private:
  std::vector<std::string> call(const std::string& request);
  net::LineStream stream_;
};

inline constexpr std::string_view kLogAddrEnv = "AA_LOG_ADDR";

/// "file:<path>" opens a local file-backed log; "host:port" connects to a
/// service. An empty spec falls back to $AA_LOG_ADDR.
std::unique_ptr<LogStore> open_log(std::string_view spec);

}  // namespace teeaudit::translog
