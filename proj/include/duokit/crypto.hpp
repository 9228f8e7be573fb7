#pragma once

#include <sodium.h>

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "duokit/serialize.hpp"

namespace duokit {

/// Replica identity: a dense index in [0, N). The primary of view v is
/// replica (v mod N).
struct ReplicaId {
  std::uint32_t index = 0;
  auto operator<=>(const ReplicaId&) const = default;
};

inline void sodium_ready() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

/// 32-byte message digest (SHA-256).
struct Digest {
  std::array<std::uint8_t, 32> bytes{};
  auto operator<=>(const Digest&) const = default;

  std::string hex() const { return to_hex(bytes); }
  std::string short_hex() const { return to_hex(bytes).substr(0, 16); }
};

inline Digest hash(std::span<const std::uint8_t> data) {
  sodium_ready();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
  return d;
}

inline Digest hash(const Bytes& data) { return hash(std::span<const std::uint8_t>(data)); }

struct PublicKey {
  std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES> bytes{};
  auto operator<=>(const PublicKey&) const = default;
};

struct SecretKey {
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> bytes{};
};

struct Signature {
  std::array<std::uint8_t, crypto_sign_BYTES> bytes{};
  auto operator<=>(const Signature&) const = default;
};

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;
};

/// Ed25519 keypair derived deterministically from an integer seed, so a
/// scenario replayed with the same configuration uses the same keys.
inline KeyPair keygen(std::uint64_t seed, const std::string& domain = "key") {
  sodium_ready();
  Writer w;
  w.raw(reinterpret_cast<const std::uint8_t*>(domain.data()), domain.size());
  w.u64(seed);
  Digest d = hash(w.peek());
  static_assert(sizeof(d.bytes) == crypto_sign_SEEDBYTES);
  KeyPair kp;
  crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.secret_key.bytes.data(), d.bytes.data());
  return kp;
}

inline Signature sign(const SecretKey& sk, std::span<const std::uint8_t> msg) {
  sodium_ready();
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, msg.data(), msg.size(), sk.bytes.data());
  return sig;
}

inline Signature sign(const SecretKey& sk, const Bytes& msg) {
  return sign(sk, std::span<const std::uint8_t>(msg));
}

/// Malformed or mismatched signatures verify false; never throws.
inline bool verify(const PublicKey& pk, std::span<const std::uint8_t> msg, const Signature& sig) {
  sodium_ready();
  return crypto_sign_verify_detached(sig.bytes.data(), msg.data(), msg.size(), pk.bytes.data()) == 0;
}

inline bool verify(const PublicKey& pk, const Bytes& msg, const Signature& sig) {
  return verify(pk, std::span<const std::uint8_t>(msg), sig);
}

}  // namespace duokit

template <>
struct std::hash<duokit::Digest> {
  std::size_t operator()(const duokit::Digest& d) const noexcept {
    std::size_t h;
    std::memcpy(&h, d.bytes.data(), sizeof(h));
    return h;
  }
};
