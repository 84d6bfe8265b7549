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

#include <bit>

#include "teeaudit/translog.hpp"

namespace teeaudit::translog {

Digest leaf_hash(ByteView payload) {
  Bytes buf;
  buf.reserve(payload.size() + 1);
  buf.push_back(0x00);
  buf.insert(buf.end(), payload.begin(), payload.end());
  return crypto::hash(buf);
}

Digest node_hash(const Digest& left, const Digest& right) {
  Bytes buf;
  buf.reserve(1 + 2 * Digest::kSize);
  buf.push_back(0x01);
  buf.insert(buf.end(), left.bytes().begin(), left.bytes().end());
  buf.insert(buf.end(), right.bytes().begin(), right.bytes().end());
  return crypto::hash(buf);
}

namespace {

// Largest power of two strictly below n (n >= 2).
std::size_t split_point(std::size_t n) { return std::bit_floor(n - 1); }

Digest subtree(std::span<const Digest> leaves) {
  if (leaves.size() == 1) return leaves[0];
  const auto k = split_point(leaves.size());
  return node_hash(subtree(leaves.first(k)), subtree(leaves.subspan(k)));
}

void collect_path(std::span<const Digest> leaves, std::size_t m,
                  std::vector<std::pair<Digest, Side>>& out) {
  if (leaves.size() <= 1) return;
  const auto k = split_point(leaves.size());
  if (m < k) {
    collect_path(leaves.first(k), m, out);
    out.emplace_back(subtree(leaves.subspan(k)), Side::kRight);
  } else {
    collect_path(leaves.subspan(k), m - k, out);
    out.emplace_back(subtree(leaves.first(k)), Side::kLeft);
  }
}

void expected_sides(std::uint64_t m, std::uint64_t n, std::vector<Side>& out) {
  if (n <= 1) return;
  const auto k = std::bit_floor(n - 1);
  if (m < k) {
    expected_sides(m, k, out);
    out.push_back(Side::kRight);
  } else {
    expected_sides(m - k, n - k, out);
    out.push_back(Side::kLeft);
  }
}

}  // namespace

Digest merkle_root(std::span<const Digest> leaves) {
  if (leaves.empty()) return crypto::hash(ByteView{});
  return subtree(leaves);
}

InclusionProof merkle_proof(std::span<const Digest> leaves, std::uint64_t index) {
  if (index >= leaves.size()) {
    throw OutOfRange("index " + std::to_string(index) + " outside tree of size " +
                     std::to_string(leaves.size()));
  }
  InclusionProof p;
  p.index = index;
  p.tree_size = leaves.size();
  collect_path(leaves, index, p.path);
  return p;
}

bool verify_inclusion(const Digest& root, const Digest& leaf, const InclusionProof& proof) {
  if (proof.index >= proof.tree_size) return false;
  std::vector<Side> sides;
  expected_sides(proof.index, proof.tree_size, sides);
  if (sides.size() != proof.path.size()) return false;
  Digest acc = leaf;
  for (std::size_t i = 0; i < sides.size(); ++i) {
    const auto& [sibling, side] = proof.path[i];
    if (side != sides[i]) return false;
    acc = side == Side::kLeft ? node_hash(sibling, acc) : node_hash(acc, sibling);
  }
  return acc == root;
}

std::string InclusionProof::path_text() const {
  if (path.empty()) return "-";
  std::string out;
  for (const auto& [d, side] : path) {
    if (!out.empty()) out.push_back(',');
    out += side == Side::kLeft ? "L:" : "R:";
    out += d.hex();
  }
  return out;
}

std::vector<std::pair<Digest, Side>> InclusionProof::parse_path(std::string_view text) {
  std::vector<std::pair<Digest, Side>> out;
  if (text == "-") return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto item = text.substr(pos, end - pos);
    if (item.size() != 2 + 2 * Digest::kSize || item[1] != ':' ||
        (item[0] != 'L' && item[0] != 'R')) {
      throw FormatError("malformed proof path element", pos);
    }
    out.emplace_back(Digest::from_hex(item.substr(2)), item[0] == 'L' ? Side::kLeft : Side::kRight);
    pos = end + 1;
  }
  return out;
}

}  // namespace teeaudit::translog
