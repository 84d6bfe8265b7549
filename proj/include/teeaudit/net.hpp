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

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace teeaudit::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  /// "host:port"; throws std::invalid_argument.
  static Endpoint parse(std::string_view text);
  std::string str() const;
};

/// A connected TCP stream exchanging newline-terminated lines.
class LineStream {
 public:
  explicit LineStream(int fd) : fd_(fd) {}
  ~LineStream();
  LineStream(LineStream&& o) noexcept : fd_(o.fd_), buf_(std::move(o.buf_)) { o.fd_ = -1; }
  LineStream& operator=(LineStream&& o) noexcept;
  LineStream(const LineStream&) = delete;
  LineStream& operator=(const LineStream&) = delete;

  static LineStream connect(const Endpoint& ep);

  /// nullopt on orderly close. Lines longer than max_line raise NetError.
  std::optional<std::string> read_line(std::size_t max_line = 64u << 20);
  void write_line(std::string_view line);

 private:
  int fd_;
  std::string buf_;
};

/// Accept loop that hands each connection's lines to a handler on its own
/// thread. Port 0 binds an ephemeral port.
class LineServer {
 public:
  using Handler = std::function<std::string(const std::string& request)>;

  LineServer(const Endpoint& listen, Handler handler);
  ~LineServer();
  LineServer(const LineServer&) = delete;
  LineServer& operator=(const LineServer&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks until stop() is called.
  void run();
  void start();  // run() on a background thread
  void stop();

 private:
  void serve(int fd);

  Handler handler_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread loop_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> clients_;
};

}  // namespace teeaudit::net
