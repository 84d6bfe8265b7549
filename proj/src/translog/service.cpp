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

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "teeaudit/translog.hpp"

namespace teeaudit::translog {

namespace {

std::vector<std::string> words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::uint64_t parse_index(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw std::invalid_argument("bad index '" + s + "'");
  }
  return v;
}

std::string ok(const std::string& rest) { return rest.empty() ? "OK" : "OK " + rest; }

std::string join_indices(const std::vector<LogEntry>& es) {
  std::string out;
  for (const auto& e : es) {
    if (!out.empty()) out.push_back(',');
    out += std::to_string(e.index);
  }
  return out;
}

}  // namespace

std::string handle_request(LogStore& log, std::string_view line) {
  try {
    const auto w = words(line);
    if (w.empty()) return "ERR request empty request";
    const auto& cmd = w[0];
    if (cmd == "PUBLISH" && w.size() == 3) {
      const auto kind = parse_kind(w[1]);
      if (!kind) return "ERR request unknown kind " + w[1];
      const auto [idx, leaf] = log.publish(*kind, base64_decode(w[2]));
      return ok(std::to_string(idx) + " " + leaf.hex());
    }
    if (cmd == "GET" && w.size() == 2) {
      const auto e = log.get(parse_index(w[1]));
      return ok(std::to_string(e.index) + " " + std::string(to_string(e.kind)) + " " +
                e.leaf_hash.hex() + " " + base64_encode(e.payload));
    }
    if (cmd == "SCAN" && w.size() == 2) {
      return ok(join_indices(log.scan(Digest::from_hex(w[1]))));
    }
    if (cmd == "ROOT" && w.size() == 1) {
      return ok(std::to_string(log.size()) + " " + log.root().hex());
    }
    if (cmd == "PROVE" && w.size() == 2) {
      const auto p = log.prove(parse_index(w[1]));
      return ok(std::to_string(p.index) + " " + std::to_string(p.tree_size) + " " +
                p.path_text());
    }
    return "ERR request unknown or malformed command";
  } catch (const OutOfRange& e) {
    return std::string("ERR range ") + e.what();
  } catch (const StorageError& e) {
    return std::string("ERR storage ") + e.what();
  } catch (const std::exception& e) {
    return std::string("ERR request ") + e.what();
  }
}

LogService::LogService(LogStore& log, const net::Endpoint& listen)
    : server_(listen, [&log](const std::string& line) { return handle_request(log, line); }) {}

// ---------------------------------------------------------------------------

RemoteLog::RemoteLog(const net::Endpoint& ep) : stream_(net::LineStream::connect(ep)) {}

std::vector<std::string> RemoteLog::call(const std::string& request) {
  stream_.write_line(request);
  const auto reply = stream_.read_line();
  if (!reply) throw RemoteError("log service closed the connection");
  auto w = words(*reply);
  if (w.empty()) throw RemoteError("empty reply from log service");
  if (w[0] == "ERR") {
    const auto code = w.size() > 1 ? w[1] : "";
    if (code == "range") throw OutOfRange(*reply);
    if (code == "storage") throw StorageError(*reply);
    throw RemoteError(*reply);
  }
  if (w[0] != "OK") throw RemoteError("unexpected reply: " + *reply);
  w.erase(w.begin());
  return w;
}

std::pair<std::uint64_t, Digest> RemoteLog::publish(EntryKind kind, ByteView payload) {
  if (payload.empty()) throw std::invalid_argument("log payload must be non-empty");
  const auto w = call("PUBLISH " + std::string(to_string(kind)) + " " + base64_encode(payload));
  if (w.size() != 2) throw RemoteError("malformed PUBLISH reply");
  return {parse_index(w[0]), Digest::from_hex(w[1])};
}

LogEntry RemoteLog::get(std::uint64_t index) {
  const auto w = call("GET " + std::to_string(index));
  if (w.size() != 4) throw RemoteError("malformed GET reply");
  LogEntry e;
  e.index = parse_index(w[0]);
  const auto kind = parse_kind(w[1]);
  if (!kind) throw RemoteError("unknown kind in GET reply");
  e.kind = *kind;
  e.leaf_hash = Digest::from_hex(w[2]);
  e.payload = base64_decode(w[3]);
  if (leaf_hash(e.payload) != e.leaf_hash) throw RemoteError("GET reply leaf hash mismatch");
  return e;
}

std::vector<LogEntry> RemoteLog::scan(const Digest& d) {
  const auto w = call("SCAN " + d.hex());
  std::vector<LogEntry> out;
  if (w.empty()) return out;
  std::istringstream in(w[0]);
  for (std::string idx; std::getline(in, idx, ',');) out.push_back(get(parse_index(idx)));
  return out;
}

std::uint64_t RemoteLog::size() {
  const auto w = call("ROOT");
  if (w.size() != 2) throw RemoteError("malformed ROOT reply");
  return parse_index(w[0]);
}

Digest RemoteLog::root() {
  const auto w = call("ROOT");
  if (w.size() != 2) throw RemoteError("malformed ROOT reply");
  return Digest::from_hex(w[1]);
}

InclusionProof RemoteLog::prove(std::uint64_t index) {
  const auto w = call("PROVE " + std::to_string(index));
  if (w.size() != 3) throw RemoteError("malformed PROVE reply");
  InclusionProof p;
  p.index = parse_index(w[0]);
  p.tree_size = parse_index(w[1]);
  p.path = InclusionProof::parse_path(w[2]);
  return p;
}

std::unique_ptr<LogStore> open_log(std::string_view spec) {
  std::string s(spec);
  if (s.empty()) {
    if (const char* env = std::getenv(std::string(kLogAddrEnv).c_str())) s = env;
  }
  if (s.empty()) {
    throw std::invalid_argument("no log endpoint: pass --log or set " + std::string(kLogAddrEnv));
  }
  if (s.rfind("file:", 0) == 0) return std::make_unique<TransparencyLog>(s.substr(5));
  return std::make_unique<RemoteLog>(net::Endpoint::parse(s));
}

}  // namespace teeaudit::translog
