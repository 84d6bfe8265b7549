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

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "teeaudit/bytes.hpp"

namespace teeaudit::crypto {

/// Call once before any other function in this namespace. Idempotent.
void init();

class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// AEAD tag check failed: the ciphertext, nonce, or associated data was altered.
class AuthenticationFailure : public CryptoError {
 public:
  AuthenticationFailure() : CryptoError("AEAD authentication failed") {}
};

class MalformedInput : public CryptoError {
 public:
  using CryptoError::CryptoError;
};

// ---------------------------------------------------------------------------
// Hash

class Digest {
 public:
  static constexpr std::size_t kSize = 32;

  Digest() = default;
  explicit Digest(const std::array<std::uint8_t, kSize>& b) : bytes_(b) {}
  static Digest from_bytes(ByteView b);  // throws MalformedInput unless 32 bytes
  static Digest from_hex(std::string_view hex);

  ByteView view() const { return bytes_; }
  const std::array<std::uint8_t, kSize>& bytes() const { return bytes_; }
  std::array<std::uint8_t, kSize>& mutable_bytes() { return bytes_; }
  std::string hex() const { return hex_encode(bytes_); }

  auto operator<=>(const Digest&) const = default;

 private:
  std::array<std::uint8_t, kSize> bytes_{};
};

/// SHA-256.
Digest hash(ByteView data);
inline Digest hash(std::string_view s) { return hash(as_bytes(s)); }

// ---------------------------------------------------------------------------
// Randomness

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  template <std::size_t N>
  std::array<std::uint8_t, N> draw() {
    std::array<std::uint8_t, N> a{};
    fill(a);
    return a;
  }
};

/// Operating-system CSPRNG.
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

/// ChaCha20 keystream keyed by SHA-256 of the seed. Reproducible across
/// platforms; for tests and deterministic replays only.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed);
  explicit SeededRandom(ByteView seed);
  ~SeededRandom() override;
  SeededRandom(const SeededRandom&) = delete;
  SeededRandom& operator=(const SeededRandom&) = delete;

  void fill(std::span<std::uint8_t> out) override;

 private:
  std::array<std::uint8_t, 32> key_{};
  std::uint32_t block_ = 0;
  std::uint32_t stream_ = 0;
};

// ---------------------------------------------------------------------------
// Secrets

/// Fixed-width secret buffer, wiped on destruction.
template <std::size_t N>
class Secret {
 public:
  Secret() = default;
  explicit Secret(const std::array<std::uint8_t, N>& b) : bytes_(b) {}
  Secret(const Secret&) = default;
  Secret& operator=(const Secret&) = default;
  ~Secret() { wipe(); }

  ByteView view() const { return bytes_; }
  std::span<std::uint8_t> mutable_view() { return bytes_; }
  void wipe();
  bool is_zero() const;

  friend bool operator==(const Secret& a, const Secret& b) {
    return a.bytes_ == b.bytes_;
  }

 private:
  std::array<std::uint8_t, N> bytes_{};
};

using SymmetricKey = Secret<32>;

// ---------------------------------------------------------------------------
// KEM: X25519 ephemeral-static Diffie-Hellman, key derived with SHA-256.

struct KemPublicKey {
  std::array<std::uint8_t, 32> bytes{};
  ByteView view() const { return bytes; }
  static KemPublicKey from_bytes(ByteView b);
  bool operator==(const KemPublicKey&) const = default;
};

struct KemKeyPair {
  KemPublicKey public_key;
  Secret<32> secret_key;
};

struct Encapsulation {
  SymmetricKey key;
  Bytes ciphertext;  // the ephemeral public key
};

KemKeyPair kem_keygen(RandomSource& rng);
Encapsulation kem_encapsulate(const KemPublicKey& pk, RandomSource& rng);
SymmetricKey kem_decapsulate(const Secret<32>& sk, ByteView ciphertext);

// ---------------------------------------------------------------------------
// AEAD: XChaCha20-Poly1305, 192-bit random nonces.

inline constexpr std::size_t kNonceSize = 24;
inline constexpr std::size_t kTagSize = 16;

struct Sealed {
  std::array<std::uint8_t, kNonceSize> nonce{};
  Bytes ciphertext;  // includes the tag
};

Sealed aead_encrypt(const SymmetricKey& k, ByteView plaintext, ByteView aad,
                    RandomSource& rng);
/// Throws AuthenticationFailure on any tampering.
Bytes aead_decrypt(const SymmetricKey& k, ByteView nonce, ByteView ciphertext,
                   ByteView aad);

/// Data-in-transit unit. Wire form: kem_ciphertext, nonce, aad,
/// aead_ciphertext, each with a 4-byte big-endian length prefix.
struct EncryptedEnvelope {
  Bytes kem_ciphertext;
  Bytes nonce;
  Bytes associated_data;
  Bytes aead_ciphertext;

  Bytes encode() const;
  static EncryptedEnvelope decode(ByteView wire);
  bool operator==(const EncryptedEnvelope&) const = default;
};

/// Encapsulates against `pk` and seals `plaintext` under the fresh key.
/// The key is returned so the sender can open replies on the same channel.
EncryptedEnvelope seal_to(const KemPublicKey& pk, ByteView plaintext, ByteView aad,
                          RandomSource& rng, SymmetricKey* key_out = nullptr);
/// Seals under an already-shared key; kem_ciphertext stays empty.
EncryptedEnvelope seal_with(const SymmetricKey& k, ByteView plaintext, ByteView aad,
                            RandomSource& rng);
Bytes open_with(const SymmetricKey& k, const EncryptedEnvelope& env);

// ---------------------------------------------------------------------------
// Vendor signatures: Ed25519.

inline constexpr std::size_t kSignatureSize = 64;

struct VerificationKey {
  std::array<std::uint8_t, 32> bytes{};
  ByteView view() const { return bytes; }
  std::string hex() const { return hex_encode(bytes); }
  static VerificationKey from_bytes(ByteView b);
  bool operator==(const VerificationKey&) const = default;
};

using Signature = std::array<std::uint8_t, kSignatureSize>;

class VendorKeyPair {
 public:
  static VendorKeyPair generate(RandomSource& rng);
  static VendorKeyPair from_seed(ByteView seed32);

  const VerificationKey& verification_key() const { return vk_; }
  Signature sign(ByteView message) const;

 private:
  VerificationKey vk_;
  Secret<64> sk_;
};

bool verify(const VerificationKey& vk, ByteView message, ByteView signature);

}  // namespace teeaudit::crypto
