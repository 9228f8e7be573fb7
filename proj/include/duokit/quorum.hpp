#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "duokit/messages.hpp"

namespace duokit {

/// Quorum thresholds for one protocol configuration. Constructors enforce
/// the two flexible-quorum constraints: the commit quorum exceeds f, and
/// commit plus view-change quorums exceed n, so any commit quorum and any
/// view-change quorum intersect.
struct QuorumParams {
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t commit_hybrid = 0;
  std::optional<std::uint32_t> commit_bft;
  std::uint32_t view_change = 0;
  std::uint32_t req_view_change = 0;

  bool operator==(const QuorumParams&) const = default;

  std::uint32_t threshold(QcFlavor flavor) const {
    if (flavor == QcFlavor::kHybrid) return commit_hybrid;
    if (!commit_bft) throw std::logic_error("configuration has no BFT commit quorum");
    return *commit_bft;
  }

  void check_invariants() const {
    if (!(commit_hybrid > f)) throw std::invalid_argument("commit quorum must exceed f");
    if (!(view_change + commit_hybrid > n))
      throw std::invalid_argument("view-change and commit quorums must cover n");
    auto attainable = [&](std::uint32_t q) { return q <= n - f; };
    if (!attainable(commit_hybrid) || !attainable(view_change) ||
        (commit_bft && !attainable(*commit_bft)) || !attainable(req_view_change))
      throw std::invalid_argument("quorum not attainable under f faults");
  }
};

/// n = 3f+1, hybrid commits at f+1, BFT commits at 2f+1, view changes at
/// 2f+1 for both fault models.
inline QuorumParams duobft_params(std::uint32_t f) {
  if (f < 1) throw std::invalid_argument("duobft requires f >= 1");
  QuorumParams p;
  p.n = 3 * f + 1;
  p.f = f;
  p.commit_hybrid = f + 1;
  p.commit_bft = 2 * f + 1;
  p.view_change = 2 * f + 1;
  p.req_view_change = f + 1;
  p.check_invariants();
  return p;
}

/// Hybrid-only configuration where n is decoupled from f: commit quorum
/// f+1, view-change quorum n-f.
inline QuorumParams flexminbft_params(std::uint32_t n, std::uint32_t f) {
  if (f < 1) throw std::invalid_argument("flexible minbft requires f >= 1");
  if (n < 2 * f + 1)
    throw std::invalid_argument("commit quorum unattainable: need n >= 2f+1");
  QuorumParams p;
  p.n = n;
  p.f = f;
  p.commit_hybrid = f + 1;
  p.commit_bft = std::nullopt;
  p.view_change = n - f;
  p.req_view_change = f + 1;
  p.check_invariants();
  return p;
}

/// USIG public keys by replica index.
struct KeyDirectory {
  std::vector<PublicKey> usig_keys;

  const PublicKey* key_of(ReplicaId r) const {
    if (r.index >= usig_keys.size()) return nullptr;
    return &usig_keys[r.index];
  }
};

/// Signature checks dominate simulation cost, and the same certificate is
/// examined by many receivers in one run. Single-threaded per run.
class VerifyCache {
 public:
  bool verify_ui(const KeyDirectory& keys, std::span<const std::uint8_t> message,
                 const UsigCertificate& cert) {
    if (cert.message_digest != hash(message)) return false;
    const PublicKey* pk = keys.key_of(cert.replica);
    if (!pk) return false;
    std::string key = cache_key(cert);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    bool ok = verify(*pk, cert.signed_payload(), cert.signature);
    memo_.emplace(std::move(key), ok);
    return ok;
  }

  bool verify_ui(const KeyDirectory& keys, const Bytes& message, const UsigCertificate& cert) {
    return verify_ui(keys, std::span<const std::uint8_t>(message), cert);
  }

  /// Signature check alone, when the attested content is not available —
  /// enough to prove the counter was consumed by that replica.
  bool verify_attestation(const KeyDirectory& keys, const UsigCertificate& cert) {
    const PublicKey* pk = keys.key_of(cert.replica);
    if (!pk) return false;
    std::string key = cache_key(cert);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    bool ok = verify(*pk, cert.signed_payload(), cert.signature);
    memo_.emplace(std::move(key), ok);
    return ok;
  }

 private:
  static std::string cache_key(const UsigCertificate& cert) {
    std::string k;
    k.reserve(4 + 8 + 32 + 64);
    auto put = [&k](const std::uint8_t* p, std::size_t n) {
      k.append(reinterpret_cast<const char*>(p), n);
    };
    std::uint32_t idx = cert.replica.index;
    std::uint64_t ctr = cert.counter;
    put(reinterpret_cast<const std::uint8_t*>(&idx), sizeof(idx));
    put(reinterpret_cast<const std::uint8_t*>(&ctr), sizeof(ctr));
    put(cert.message_digest.bytes.data(), cert.message_digest.bytes.size());
    put(cert.signature.bytes.data(), cert.signature.bytes.size());
    return k;
  }

  std::unordered_map<std::string, bool> memo_;
};

/// One collected endorsement of a block: the voter's attestation over the
/// block's vote core. A Propose contributes the proposer's endorsement in
/// the same form.
struct VoteEntry {
  std::uint64_t view = 0;
  std::uint32_t instance = 0;
  std::uint64_t height = 0;
  Digest block_digest;
  UsigCertificate ui;
};

/// Assembles a certificate of the requested flavor, or nullopt when the
/// distinct-replica count is still short. Invalid attestations are excluded
/// before counting; duplicate replicas count once. All entries must
/// reference the same block context, anything else is a caller bug.
inline std::optional<QuorumCertificate> try_assemble(const std::vector<VoteEntry>& votes,
                                                     QcFlavor flavor, const QuorumParams& params,
                                                     const KeyDirectory& keys,
                                                     VerifyCache& cache) {
  if (votes.empty()) return std::nullopt;
  const VoteEntry& first = votes.front();
  for (const auto& v : votes) {
    if (v.view != first.view || v.instance != first.instance || v.height != first.height ||
        v.block_digest != first.block_digest)
      throw std::logic_error("try_assemble: mixed vote contexts");
  }
  Bytes core = vote_core(first.view, first.instance, first.height, first.block_digest);
  std::vector<UsigCertificate> valid;
  for (const auto& v : votes) {
    if (!cache.verify_ui(keys, core, v.ui)) continue;
    bool dup = false;
    for (const auto& kept : valid) {
      if (kept.replica == v.ui.replica) {
        dup = true;
        break;
      }
    }
    if (!dup) valid.push_back(v.ui);
  }
  if (valid.size() < params.threshold(flavor)) return std::nullopt;
  std::sort(valid.begin(), valid.end(), [](const UsigCertificate& a, const UsigCertificate& b) {
    return a.replica.index < b.replica.index;
  });
  QuorumCertificate qc;
  qc.flavor = flavor;
  qc.view = first.view;
  qc.instance = first.instance;
  qc.height = first.height;
  qc.block_digest = first.block_digest;
  qc.votes = std::move(valid);
  return qc;
}

/// True iff every attestation in the certificate verifies against the
/// certificate's own block context and the distinct-replica count meets the
/// flavor threshold.
inline bool validate_certificate(const QuorumCertificate& qc, const QuorumParams& params,
                                 const KeyDirectory& keys, VerifyCache& cache) {
  if (qc.flavor == QcFlavor::kBft && !params.commit_bft) return false;
  Bytes core = vote_core(qc.view, qc.instance, qc.height, qc.block_digest);
  std::vector<std::uint32_t> seen;
  for (const auto& ui : qc.votes) {
    if (!cache.verify_ui(keys, core, ui)) return false;
    if (std::find(seen.begin(), seen.end(), ui.replica.index) != seen.end()) return false;
    seen.push_back(ui.replica.index);
  }
  return seen.size() >= params.threshold(qc.flavor);
}

/// Deterministic per-replica USIG keys for a cluster.
inline KeyDirectory make_key_directory(std::uint32_t n, std::uint64_t key_base,
                                       std::vector<KeyPair>* secret_out = nullptr) {
  KeyDirectory dir;
  for (std::uint32_t i = 0; i < n; ++i) {
    KeyPair kp = keygen(key_base * 0x9e3779b97f4a7c15ULL + i, "usig");
    dir.usig_keys.push_back(kp.public_key);
    if (secret_out) secret_out->push_back(kp);
  }
  return dir;
}

}  // namespace duokit
