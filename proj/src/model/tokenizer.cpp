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

#include <cctype>

#include "teeaudit/model.hpp"

namespace teeaudit::model {

namespace {

bool word_char(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool attaches_left(std::string_view tok) {
  return tok.size() == 1 && std::string_view(".,!?;:)%").find(tok[0]) != std::string_view::npos;
}

}  // namespace

Tokenizer::Tokenizer(const std::vector<std::string>& vocabulary) : vocab_(&vocabulary) {
  for (std::size_t i = 0; i < vocabulary.size(); ++i) {
    index_.emplace(vocabulary[i], static_cast<std::int32_t>(i));
  }
}

std::vector<std::string> Tokenizer::split(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  for (unsigned char c : text) {
    if (word_char(c)) {
      word.push_back(static_cast<char>(c));
      continue;
    }
    if (!word.empty()) out.push_back(std::move(word)), word.clear();
    if (!std::isspace(c)) out.emplace_back(1, static_cast<char>(c));
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

std::int32_t Tokenizer::id(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  if (auto it = index_.find(lower(token)); it != index_.end()) return it->second;
  return kUnk;
}

std::vector<std::int32_t> Tokenizer::encode(std::string_view text) const {
  std::vector<std::int32_t> ids;
  for (const auto& piece : split(text)) ids.push_back(id(piece));
  return ids;
}

std::string Tokenizer::decode(std::span<const std::int32_t> ids) const {
  std::string out;
  bool glue = true;
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_->size()) continue;
    if (id < kNumSpecial && id != kUnk) continue;
    const auto& tok = (*vocab_)[id];
    if (!glue && !attaches_left(tok)) out.push_back(' ');
    out += tok;
    glue = tok == "(";
  }
  return out;
}

}  // namespace teeaudit::model
