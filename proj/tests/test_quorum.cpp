#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "duokit/quorum.hpp"

using namespace duokit;

namespace {

struct Cluster {
  QuorumParams params;
  KeyDirectory keys;
  std::vector<UsigInstance> usigs;
  VerifyCache cache;

  explicit Cluster(QuorumParams p) : params(p) {
    std::vector<KeyPair> pairs;
    keys = make_key_directory(params.n, 1, &pairs);
    for (std::uint32_t i = 0; i < params.n; ++i)
      usigs.emplace_back(ReplicaId{i}, pairs[i]);
  }

  VoteEntry vote(std::uint32_t replica, std::uint64_t view, std::uint64_t height,
                 const Digest& dig, std::uint32_t instance = 0) {
    VoteEntry v;
    v.view = view;
    v.instance = instance;
    v.height = height;
    v.block_digest = dig;
    v.ui = usigs[replica].create_ui(vote_core(view, instance, height, dig));
    return v;
  }
};

Digest digest_of(std::uint8_t fill) {
  Digest d;
  d.bytes.fill(fill);
  return d;
}

}  // namespace

TEST_CASE("duobft parameter table") {
  QuorumParams p = duobft_params(1);
  REQUIRE(p.n == 4);
  REQUIRE(p.commit_hybrid == 2);
  REQUIRE(p.commit_bft == 3);
  REQUIRE(p.view_change == 3);
  REQUIRE(p.req_view_change == 2);

  p = duobft_params(2);
  REQUIRE(p.n == 7);
  REQUIRE(p.commit_hybrid == 3);
  REQUIRE(p.commit_bft == 5);
  REQUIRE(p.view_change == 5);

  REQUIRE_THROWS_AS(duobft_params(0), std::invalid_argument);
}

TEST_CASE("flexible minbft parameters") {
  QuorumParams p = flexminbft_params(4, 1);
  REQUIRE(p.commit_hybrid == 2);
  REQUIRE(p.view_change == 3);
  REQUIRE_FALSE(p.commit_bft.has_value());

  p = flexminbft_params(5, 1);
  REQUIRE(p.commit_hybrid == 2);
  REQUIRE(p.view_change == 4);

  REQUIRE_THROWS_AS(flexminbft_params(4, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(flexminbft_params(10, 0), std::invalid_argument);
}

TEST_CASE("quorum equations hold for randomized sizes, rejecting unattainable ones") {
  std::mt19937_64 rng(2024);
  int accepted = 0, rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    std::uint32_t n = 1 + rng() % 50;
    std::uint32_t f = rng() % (n + 2);
    bool attainable = f >= 1 && n >= 2 * f + 1;
    if (attainable) {
      QuorumParams p = flexminbft_params(n, f);
      REQUIRE(p.commit_hybrid > p.f);
      REQUIRE(p.view_change + p.commit_hybrid > p.n);
      REQUIRE(p.commit_hybrid <= p.n - p.f);
      REQUIRE(p.view_change <= p.n - p.f);
      ++accepted;
    } else {
      REQUIRE_THROWS_AS(flexminbft_params(n, f), std::invalid_argument);
      ++rejected;
    }
  }
  REQUIRE(accepted > 0);
  REQUIRE(rejected > 0);
}

TEST_CASE("try_assemble thresholds, dedup, and exclusion") {
  Cluster cl(duobft_params(1));
  Digest dig = digest_of(0xAA);

  SECTION("f+1 distinct votes form a hybrid certificate") {
    std::vector<VoteEntry> votes = {cl.vote(0, 0, 1, dig), cl.vote(1, 0, 1, dig)};
    auto qc = try_assemble(votes, QcFlavor::kHybrid, cl.params, cl.keys, cl.cache);
    REQUIRE(qc.has_value());
    REQUIRE(qc->votes.size() == 2);
    REQUIRE(validate_certificate(*qc, cl.params, cl.keys, cl.cache));
  }

  SECTION("duplicate replicas count once") {
    std::vector<VoteEntry> votes = {cl.vote(0, 0, 1, dig), cl.vote(1, 0, 1, dig),
                                    cl.vote(1, 0, 1, dig)};
    auto qc = try_assemble(votes, QcFlavor::kBft, cl.params, cl.keys, cl.cache);
    REQUIRE_FALSE(qc.has_value());
  }

  SECTION("tampered attestation is excluded before counting") {
    std::vector<VoteEntry> votes = {cl.vote(0, 0, 1, dig), cl.vote(1, 0, 1, dig),
                                    cl.vote(2, 0, 1, dig)};
    votes[2].ui.counter += 5;  // breaks the signature binding
    auto qc = try_assemble(votes, QcFlavor::kBft, cl.params, cl.keys, cl.cache);
    REQUIRE_FALSE(qc.has_value());
    auto hybrid = try_assemble(votes, QcFlavor::kHybrid, cl.params, cl.keys, cl.cache);
    REQUIRE(hybrid.has_value());
  }

  SECTION("mixed digests are a caller bug") {
    std::vector<VoteEntry> votes = {cl.vote(0, 0, 1, dig), cl.vote(1, 0, 1, digest_of(0xBB))};
    REQUIRE_THROWS_AS(try_assemble(votes, QcFlavor::kHybrid, cl.params, cl.keys, cl.cache),
                      std::logic_error);
  }
}

TEST_CASE("validate_certificate rejects shortfall and forgery") {
  Cluster cl(duobft_params(1));
  Digest dig = digest_of(0x5C);
  std::vector<VoteEntry> votes = {cl.vote(0, 0, 1, dig), cl.vote(1, 0, 1, dig),
                                  cl.vote(2, 0, 1, dig)};
  auto qc = try_assemble(votes, QcFlavor::kBft, cl.params, cl.keys, cl.cache);
  REQUIRE(qc.has_value());
  REQUIRE(validate_certificate(*qc, cl.params, cl.keys, cl.cache));

  SECTION("one vote removed drops below threshold") {
    QuorumCertificate short_qc = *qc;
    short_qc.votes.pop_back();
    REQUIRE_FALSE(validate_certificate(short_qc, cl.params, cl.keys, cl.cache));
  }

  SECTION("forged signature in an exactly-threshold certificate") {
    QuorumCertificate forged = *qc;
    forged.votes[1].signature.bytes[0] ^= 0x01;
    REQUIRE_FALSE(validate_certificate(forged, cl.params, cl.keys, cl.cache));
  }

  SECTION("duplicate replica entries rejected") {
    QuorumCertificate dup = *qc;
    dup.votes[2] = dup.votes[0];
    REQUIRE_FALSE(validate_certificate(dup, cl.params, cl.keys, cl.cache));
  }
}

// Brute-force quorum intersection oracles over every subset pair, for all
// system sizes up to 10. These are the combinatorial facts the safety
// arguments stand on.
namespace {

int popcount_intersection(std::uint32_t a, std::uint32_t b) { return __builtin_popcount(a & b); }

std::vector<std::uint32_t> subsets_of_size(std::uint32_t n, std::uint32_t k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask)
    if (static_cast<std::uint32_t>(__builtin_popcount(mask)) == k) out.push_back(mask);
  return out;
}

}  // namespace

TEST_CASE("BFT quorums pairwise intersect in at least f+1 replicas") {
  for (std::uint32_t f = 1; f <= 3; ++f) {
    QuorumParams p = duobft_params(f);
    if (p.n > 10) continue;
    auto quorums = subsets_of_size(p.n, *p.commit_bft);
    for (auto a : quorums)
      for (auto b : quorums)
        REQUIRE(popcount_intersection(a, b) >= static_cast<int>(f + 1));
  }
}

TEST_CASE("hybrid quorums need not intersect, but always meet view-change quorums") {
  for (std::uint32_t f = 1; f <= 3; ++f) {
    QuorumParams p = duobft_params(f);
    if (p.n > 10) continue;
    auto hybrid = subsets_of_size(p.n, p.commit_hybrid);
    auto vc = subsets_of_size(p.n, p.view_change);

    bool found_disjoint_pair = false;
    for (auto a : hybrid) {
      for (auto b : hybrid)
        if (popcount_intersection(a, b) == 0) found_disjoint_pair = true;
      for (auto v : vc) REQUIRE(popcount_intersection(a, v) >= 1);
    }
    REQUIRE(found_disjoint_pair);
  }

  // Same for the hybrid-only configuration.
  QuorumParams p = flexminbft_params(7, 2);
  auto hybrid = subsets_of_size(p.n, p.commit_hybrid);
  auto vc = subsets_of_size(p.n, p.view_change);
  for (auto a : hybrid)
    for (auto v : vc) REQUIRE(popcount_intersection(a, v) >= 1);
}
