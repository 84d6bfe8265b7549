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

#include "teeaudit/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <mutex>

namespace teeaudit::crypto {

void init() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw CryptoError("libsodium initialisation failed");
  });
}

namespace {
struct AutoInit {
  AutoInit() { init(); }
} auto_init;

constexpr std::string_view kKemLabel = "teeaudit-kem-x25519-sha256-v1";
}  // namespace

// ---------------------------------------------------------------------------

Digest Digest::from_bytes(ByteView b) {
  if (b.size() != kSize) {
    throw MalformedInput("digest must be 32 bytes, got " + std::to_string(b.size()));
  }
  std::array<std::uint8_t, kSize> a{};
  std::copy(b.begin(), b.end(), a.begin());
  return Digest(a);
}

Digest Digest::from_hex(std::string_view hex) { return from_bytes(hex_decode(hex)); }

Digest hash(ByteView data) {
  std::array<std::uint8_t, Digest::kSize> out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return Digest(out);
}

// ---------------------------------------------------------------------------

void SystemRandom::fill(std::span<std::uint8_t> out) {
  randombytes_buf(out.data(), out.size());
}

SeededRandom::SeededRandom(std::uint64_t seed) {
  ByteWriter w;
  w.u64(seed);
  crypto_hash_sha256(key_.data(), w.bytes().data(), w.bytes().size());
}

SeededRandom::SeededRandom(ByteView seed) {
  crypto_hash_sha256(key_.data(), seed.data(), seed.size());
}

SeededRandom::~SeededRandom() { sodium_memzero(key_.data(), key_.size()); }

void SeededRandom::fill(std::span<std::uint8_t> out) {
  std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> nonce{};
  for (int i = 0; i < 4; ++i) nonce[i] = static_cast<std::uint8_t>(stream_ >> (8 * i));
  std::fill(out.begin(), out.end(), 0);
  crypto_stream_chacha20_ietf_xor_ic(out.data(), out.data(), out.size(),
                                     nonce.data(), block_, key_.data());
  const auto blocks = static_cast<std::uint32_t>((out.size() + 63) / 64);
  if (block_ > UINT32_MAX - blocks) {
    ++stream_;
    block_ = 0;
  } else {
    block_ += blocks;
  }
}

// ---------------------------------------------------------------------------

template <std::size_t N>
void Secret<N>::wipe() {
  sodium_memzero(bytes_.data(), bytes_.size());
}

template <std::size_t N>
bool Secret<N>::is_zero() const {
  return sodium_is_zero(bytes_.data(), bytes_.size()) == 1;
}

template class Secret<32>;
template class Secret<64>;

// ---------------------------------------------------------------------------

KemPublicKey KemPublicKey::from_bytes(ByteView b) {
  if (b.size() != crypto_scalarmult_BYTES) {
    throw MalformedInput("KEM public key must be 32 bytes");
  }
  KemPublicKey pk;
  std::copy(b.begin(), b.end(), pk.bytes.begin());
  return pk;
}

namespace {

SymmetricKey derive_key(ByteView shared, ByteView ephemeral_pk, ByteView static_pk) {
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  crypto_hash_sha256_update(&st, as_bytes(kKemLabel).data(), kKemLabel.size());
  crypto_hash_sha256_update(&st, shared.data(), shared.size());
  crypto_hash_sha256_update(&st, ephemeral_pk.data(), ephemeral_pk.size());
  crypto_hash_sha256_update(&st, static_pk.data(), static_pk.size());
  SymmetricKey k;
  crypto_hash_sha256_final(&st, k.mutable_view().data());
  sodium_memzero(&st, sizeof st);
  return k;
}

}  // namespace

KemKeyPair kem_keygen(RandomSource& rng) {
  KemKeyPair kp;
  rng.fill(kp.secret_key.mutable_view());
  crypto_scalarmult_base(kp.public_key.bytes.data(), kp.secret_key.view().data());
  return kp;
}

Encapsulation kem_encapsulate(const KemPublicKey& pk, RandomSource& rng) {
  Secret<32> eph_sk;
  rng.fill(eph_sk.mutable_view());
  std::array<std::uint8_t, 32> eph_pk{};
  crypto_scalarmult_base(eph_pk.data(), eph_sk.view().data());
  Secret<32> shared;
  // Fails for low-order points, which also covers the all-zero key.
  if (crypto_scalarmult(shared.mutable_view().data(), eph_sk.view().data(),
                        pk.bytes.data()) != 0) {
    throw MalformedInput("KEM public key is not a valid X25519 point");
  }
  Encapsulation e{derive_key(shared.view(), eph_pk, pk.bytes),
                  Bytes(eph_pk.begin(), eph_pk.end())};
  return e;
}

SymmetricKey kem_decapsulate(const Secret<32>& sk, ByteView ciphertext) {
  if (ciphertext.size() != crypto_scalarmult_BYTES) {
    throw MalformedInput("KEM ciphertext must be 32 bytes");
  }
  std::array<std::uint8_t, 32> own_pk{};
  crypto_scalarmult_base(own_pk.data(), sk.view().data());
  Secret<32> shared;
  if (crypto_scalarmult(shared.mutable_view().data(), sk.view().data(),
                        ciphertext.data()) != 0) {
    throw MalformedInput("KEM ciphertext is not a valid X25519 point");
  }
  return derive_key(shared.view(), ciphertext, own_pk);
}

// ---------------------------------------------------------------------------

static_assert(kNonceSize == crypto_aead_xchacha20poly1305_ietf_NPUBBYTES);
static_assert(kTagSize == crypto_aead_xchacha20poly1305_ietf_ABYTES);

Sealed aead_encrypt(const SymmetricKey& k, ByteView plaintext, ByteView aad,
                    RandomSource& rng) {
  Sealed s;
  rng.fill(s.nonce);
  s.ciphertext.resize(plaintext.size() + kTagSize);
  unsigned long long clen = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(
      s.ciphertext.data(), &clen, plaintext.data(), plaintext.size(), aad.data(),
      aad.size(), nullptr, s.nonce.data(), k.view().data());
  s.ciphertext.resize(clen);
  return s;
}

Bytes aead_decrypt(const SymmetricKey& k, ByteView nonce, ByteView ciphertext,
                   ByteView aad) {
  if (nonce.size() != kNonceSize || ciphertext.size() < kTagSize) {
    throw AuthenticationFailure();
  }
  Bytes out(ciphertext.size() - kTagSize);
  unsigned long long mlen = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(
          out.data(), &mlen, nullptr, ciphertext.data(), ciphertext.size(),
          aad.data(), aad.size(), nonce.data(), k.view().data()) != 0) {
    throw AuthenticationFailure();
  }
  out.resize(mlen);
  return out;
}

Bytes EncryptedEnvelope::encode() const {
  ByteWriter w;
  w.blob(kem_ciphertext);
  w.blob(nonce);
  w.blob(associated_data);
  w.blob(aead_ciphertext);
  return std::move(w).take();
}

EncryptedEnvelope EncryptedEnvelope::decode(ByteView wire) {
  ByteReader r(wire);
  EncryptedEnvelope e;
  e.kem_ciphertext = r.blob();
  e.nonce = r.blob();
  e.associated_data = r.blob();
  e.aead_ciphertext = r.blob();
  r.expect_end();
  return e;
}

EncryptedEnvelope seal_to(const KemPublicKey& pk, ByteView plaintext, ByteView aad,
                          RandomSource& rng, SymmetricKey* key_out) {
  auto enc = kem_encapsulate(pk, rng);
  auto env = seal_with(enc.key, plaintext, aad, rng);
  env.kem_ciphertext = std::move(enc.ciphertext);
  if (key_out) *key_out = enc.key;
  return env;
}

EncryptedEnvelope seal_with(const SymmetricKey& k, ByteView plaintext, ByteView aad,
                            RandomSource& rng) {
  auto s = aead_encrypt(k, plaintext, aad, rng);
  EncryptedEnvelope env;
  env.nonce.assign(s.nonce.begin(), s.nonce.end());
  env.associated_data.assign(aad.begin(), aad.end());
  env.aead_ciphertext = std::move(s.ciphertext);
  return env;
}

Bytes open_with(const SymmetricKey& k, const EncryptedEnvelope& env) {
  return aead_decrypt(k, env.nonce, env.aead_ciphertext, env.associated_data);
}

// ---------------------------------------------------------------------------

VerificationKey VerificationKey::from_bytes(ByteView b) {
  if (b.size() != crypto_sign_PUBLICKEYBYTES) {
    throw MalformedInput("verification key must be 32 bytes");
  }
  VerificationKey vk;
  std::copy(b.begin(), b.end(), vk.bytes.begin());
  return vk;
}

VendorKeyPair VendorKeyPair::generate(RandomSource& rng) {
  auto seed = rng.draw<crypto_sign_SEEDBYTES>();
  auto kp = from_seed(seed);
  sodium_memzero(seed.data(), seed.size());
  return kp;
}

VendorKeyPair VendorKeyPair::from_seed(ByteView seed32) {
  if (seed32.size() != crypto_sign_SEEDBYTES) {
    throw MalformedInput("vendor seed must be 32 bytes");
  }
  VendorKeyPair kp;
  crypto_sign_seed_keypair(kp.vk_.bytes.data(), kp.sk_.mutable_view().data(),
                           seed32.data());
  return kp;
}

Signature VendorKeyPair::sign(ByteView message) const {
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                       sk_.view().data());
  return sig;
}

bool verify(const VerificationKey& vk, ByteView message, ByteView signature) {
  if (signature.size() != kSignatureSize) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     vk.bytes.data()) == 0;
}

}  // namespace teeaudit::crypto
