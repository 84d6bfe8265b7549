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

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <mutex>

#include "teeaudit/translog.hpp"

namespace teeaudit::translog {

std::string_view to_string(EntryKind k) {
  switch (k) {
    case EntryKind::kImageRegistration: return "ImageRegistration";
    case EntryKind::kPrepareAttestation: return "PrepareAttestation";
    case EntryKind::kAuditResult: return "AuditResult";
    case EntryKind::kAuditAttestation: return "AuditAttestation";
  }
  return "?";
}

std::optional<EntryKind> parse_kind(std::string_view s) {
  for (auto k : {EntryKind::kImageRegistration, EntryKind::kPrepareAttestation,
                 EntryKind::kAuditResult, EntryKind::kAuditAttestation}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

bool valid_kind(std::uint8_t k) { return k >= 1 && k <= 4; }

[[noreturn]] void storage_fail(const std::string& what) {
  throw StorageError(what + ": " + std::strerror(errno));
}

bool contains(ByteView hay, ByteView needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

TransparencyLog::TransparencyLog(std::filesystem::path file) : file_(std::move(file)) {
  fd_ = ::open(file_->c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) storage_fail("cannot open log file " + file_->string());
  load();
}

TransparencyLog::~TransparencyLog() {
  if (fd_ >= 0) ::close(fd_);
}

void TransparencyLog::load() {
  Bytes data;
  struct stat st {};
  if (::fstat(fd_, &st) != 0) storage_fail("stat");
  data.resize(static_cast<std::size_t>(st.st_size));
  std::size_t got = 0;
  while (got < data.size()) {
    const auto n = ::pread(fd_, data.data() + got, data.size() - got, static_cast<off_t>(got));
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_fail("read");
    }
    if (n == 0) break;
    got += static_cast<std::size_t>(n);
  }
  data.resize(got);

  std::size_t off = 0;
  while (data.size() - off >= 5) {
    ByteReader r(ByteView(data).subspan(off, 4));
    const auto len = r.u32();
    if (len < 2) throw StorageError("corrupt log record at offset " + std::to_string(off));
    if (data.size() - off - 4 < len) break;  // torn tail
    const auto kind = data[off + 4];
    if (!valid_kind(kind)) {
      throw StorageError("unknown entry kind at offset " + std::to_string(off));
    }
    LogEntry e;
    e.index = entries_.size();
    e.kind = static_cast<EntryKind>(kind);
    e.payload.assign(data.begin() + off + 5, data.begin() + off + 4 + len);
    e.leaf_hash = leaf_hash(e.payload);
    leaves_.push_back(e.leaf_hash);
    entries_.push_back(std::move(e));
    off += 4 + len;
  }
  if (off != data.size() && ::ftruncate(fd_, static_cast<off_t>(off)) != 0) {
    storage_fail("truncate torn record");
  }
  root_ = merkle_root(leaves_);
}

std::pair<std::uint64_t, Digest> TransparencyLog::publish(EntryKind kind, ByteView payload) {
  if (payload.empty()) throw std::invalid_argument("log payload must be non-empty");
  if (!valid_kind(static_cast<std::uint8_t>(kind))) throw std::invalid_argument("bad entry kind");
  std::unique_lock lock(mu_);
  if (fd_ >= 0) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(payload.size() + 1));
    w.u8(static_cast<std::uint8_t>(kind));
    w.raw(payload);
    const auto rec = std::move(w).take();
    struct stat st {};
    if (::fstat(fd_, &st) != 0) storage_fail("stat");
    std::size_t done = 0;
    while (done < rec.size()) {
      const auto n = ::write(fd_, rec.data() + done, rec.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        const int saved = errno;
        if (::ftruncate(fd_, st.st_size) != 0) errno = saved;
        errno = saved;
        storage_fail("append");
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd_) != 0) storage_fail("sync");
  }
  LogEntry e;
  e.index = entries_.size();
  e.kind = kind;
  e.payload.assign(payload.begin(), payload.end());
  e.leaf_hash = leaf_hash(payload);
  leaves_.push_back(e.leaf_hash);
  entries_.push_back(e);
  root_ = merkle_root(leaves_);
  return {e.index, e.leaf_hash};
}

LogEntry TransparencyLog::get(std::uint64_t index) {
  std::shared_lock lock(mu_);
  if (index >= entries_.size()) {
    throw OutOfRange("log index " + std::to_string(index) + " >= size " +
                     std::to_string(entries_.size()));
  }
  return entries_[index];
}

std::vector<LogEntry> TransparencyLog::scan(const std::function<bool(const LogEntry&)>& pred) {
  std::shared_lock lock(mu_);
  std::vector<LogEntry> out;
  for (const auto& e : entries_) {
    if (pred(e)) out.push_back(e);
  }
  return out;
}

std::vector<LogEntry> TransparencyLog::scan(const Digest& d) {
  return scan([&](const LogEntry& e) {
    return contains(e.payload, d.view()) || crypto::hash(e.payload) == d;
  });
}

std::uint64_t TransparencyLog::size() {
  std::shared_lock lock(mu_);
  return entries_.size();
}

Digest TransparencyLog::root() {
  std::shared_lock lock(mu_);
  return root_;
}

InclusionProof TransparencyLog::prove(std::uint64_t index) {
  std::shared_lock lock(mu_);
  return merkle_proof(leaves_, index);
}

}  // namespace teeaudit::translog
