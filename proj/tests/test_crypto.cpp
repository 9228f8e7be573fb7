#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <unordered_set>

#include "duokit/crypto.hpp"

using namespace duokit;

TEST_CASE("keygen is deterministic per seed") {
  KeyPair a = keygen(7);
  KeyPair b = keygen(7);
  REQUIRE(a.public_key == b.public_key);
  REQUIRE(a.secret_key.bytes == b.secret_key.bytes);

  KeyPair c = keygen(8);
  REQUIRE(a.public_key != c.public_key);
}

TEST_CASE("sign/verify round-trips and rejects everything else") {
  KeyPair kp = keygen(7);
  Bytes msg = {1, 2, 3, 4, 5};
  Signature sig = sign(kp.secret_key, msg);
  REQUIRE(verify(kp.public_key, msg, sig));

  SECTION("flipped payload bit fails") {
    Bytes tampered = msg;
    tampered[2] ^= 0x01;
    REQUIRE_FALSE(verify(kp.public_key, tampered, sig));
  }
  SECTION("wrong key fails") {
    KeyPair other = keygen(8);
    REQUIRE_FALSE(verify(other.public_key, msg, sig));
  }
  SECTION("malformed signature fails, not throws") {
    Signature garbage;
    REQUIRE_FALSE(verify(kp.public_key, msg, garbage));
  }
}

TEST_CASE("cross verification fails over a randomized corpus") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 50; ++i) {
    std::uint64_t s1 = rng(), s2 = rng();
    if (s1 == s2) continue;
    Bytes m1(16), m2(16);
    for (auto& b : m1) b = static_cast<std::uint8_t>(rng());
    for (auto& b : m2) b = static_cast<std::uint8_t>(rng());
    KeyPair k1 = keygen(s1), k2 = keygen(s2);
    Signature sig = sign(k1.secret_key, m1);
    REQUIRE(verify(k1.public_key, m1, sig));
    REQUIRE_FALSE(verify(k2.public_key, m1, sig));
    if (m1 != m2) REQUIRE_FALSE(verify(k1.public_key, m2, sig));
  }
}

TEST_CASE("hash is pure and stable") {
  Bytes empty;
  REQUIRE(hash(empty) == hash(empty));
  // SHA-256 of the empty string, as published everywhere.
  REQUIRE(hash(empty).hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("hash distinct over a random corpus") {
  std::mt19937_64 rng(1234);
  std::unordered_set<std::string> seen;
  for (int i = 0; i < 10000; ++i) {
    Bytes m(24);
    for (auto& b : m) b = static_cast<std::uint8_t>(rng());
    auto [it, inserted] = seen.insert(hash(m).hex());
    REQUIRE(inserted);
  }
  REQUIRE(seen.size() == 10000);
}
