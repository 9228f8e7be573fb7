#pragma once

#include <cstdint>
#include <stdexcept>

#include "duokit/crypto.hpp"
#include "duokit/serialize.hpp"

namespace duokit {

/// Attestation from a replica's trusted counter: binds (counter, message
/// digest) under the instance's signing key. An honest instance never
/// issues two certificates with the same counter, and issues counters
/// 1, 2, 3, ... with no gaps.
struct UsigCertificate {
  ReplicaId replica;
  std::uint64_t counter = 0;
  Digest message_digest;
  Signature signature;

  auto operator<=>(const UsigCertificate&) const = default;

  Bytes signed_payload() const {
    Writer w;
    w.u64(counter);
    w.raw(message_digest.bytes.data(), message_digest.bytes.size());
    return w.take();
  }
};

enum class UsigMode : std::uint8_t { kHonest, kCompromised };

/// In-process emulation of the trusted counter service. The trust boundary
/// is the mode switch: a compromised instance signs whatever counter the
/// fault script asks for, which is exactly what a broken enclave allows.
class UsigInstance {
 public:
  UsigInstance() = default;
  UsigInstance(ReplicaId owner, KeyPair keypair, UsigMode mode = UsigMode::kHonest)
      : owner_(owner), keypair_(std::move(keypair)), mode_(mode) {}

  ReplicaId owner() const { return owner_; }
  const PublicKey& public_key() const { return keypair_.public_key; }
  std::uint64_t last_counter() const { return last_counter_; }
  UsigMode mode() const { return mode_; }

  /// Next certificate in sequence. Counters start at 1; 0 means "nothing
  /// issued yet" so gap checks stay unambiguous.
  UsigCertificate create_ui(std::span<const std::uint8_t> message) {
    last_counter_ += 1;
    return make(last_counter_, message);
  }

  UsigCertificate create_ui(const Bytes& message) {
    return create_ui(std::span<const std::uint8_t>(message));
  }

  /// Compromised instances can reuse or skip counters at the adversary's
  /// direction. Never available in honest mode.
  UsigCertificate create_ui_with_counter(std::uint64_t counter,
                                         std::span<const std::uint8_t> message) {
    if (mode_ != UsigMode::kCompromised)
      throw std::logic_error("create_ui_with_counter requires a compromised instance");
    if (counter > last_counter_) last_counter_ = counter;
    return make(counter, message);
  }

  UsigCertificate create_ui_with_counter(std::uint64_t counter, const Bytes& message) {
    return create_ui_with_counter(counter, std::span<const std::uint8_t>(message));
  }

 private:
  UsigCertificate make(std::uint64_t counter, std::span<const std::uint8_t> message) {
    UsigCertificate cert;
    cert.replica = owner_;
    cert.counter = counter;
    cert.message_digest = hash(message);
    cert.signature = sign(keypair_.secret_key, cert.signed_payload());
    return cert;
  }

  ReplicaId owner_;
  KeyPair keypair_;
  UsigMode mode_ = UsigMode::kHonest;
  std::uint64_t last_counter_ = 0;
};

/// True iff the certificate was produced for exactly these message bytes by
/// the USIG instance owning `pk`. Malformed certificates verify false.
inline bool verify_ui(const PublicKey& pk, std::span<const std::uint8_t> message,
                      const UsigCertificate& cert) {
  if (cert.message_digest != hash(message)) return false;
  return verify(pk, cert.signed_payload(), cert.signature);
}

inline bool verify_ui(const PublicKey& pk, const Bytes& message, const UsigCertificate& cert) {
  return verify_ui(pk, std::span<const std::uint8_t>(message), cert);
}

}  // namespace duokit
