#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "duokit/usig.hpp"

using namespace duokit;

namespace {
UsigInstance make_instance(std::uint32_t idx, UsigMode mode = UsigMode::kHonest) {
  return UsigInstance(ReplicaId{idx}, keygen(100 + idx, "usig"), mode);
}
}  // namespace

TEST_CASE("counters start at 1 and increase by exactly one") {
  UsigInstance usig = make_instance(0);
  Bytes m1 = {1}, m2 = {2};
  REQUIRE(usig.create_ui(m1).counter == 1);
  REQUIRE(usig.create_ui(m2).counter == 2);
  REQUIRE(usig.last_counter() == 2);
}

TEST_CASE("issued counters over n calls are exactly 1..n") {
  UsigInstance usig = make_instance(1);
  std::mt19937_64 rng(7);
  std::set<std::uint64_t> counters;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    Bytes m(8);
    for (auto& b : m) b = static_cast<std::uint8_t>(rng());
    counters.insert(usig.create_ui(m).counter);
  }
  REQUIRE(counters.size() == n);
  REQUIRE(*counters.begin() == 1);
  REQUIRE(*counters.rbegin() == n);
}

TEST_CASE("verify_ui accepts exactly what create_ui produced") {
  UsigInstance usig = make_instance(2);
  PublicKey pk = usig.public_key();
  std::mt19937_64 rng(99);
  for (int i = 0; i < 30; ++i) {
    Bytes m(16);
    for (auto& b : m) b = static_cast<std::uint8_t>(rng());
    UsigCertificate cert = usig.create_ui(m);
    REQUIRE(verify_ui(pk, m, cert));

    UsigCertificate bumped = cert;
    bumped.counter += 1;  // attacker increments without re-signing
    REQUIRE_FALSE(verify_ui(pk, m, bumped));

    Bytes other = m;
    other[0] ^= 0xff;
    REQUIRE_FALSE(verify_ui(pk, other, cert));
  }
}

TEST_CASE("certificate does not verify under another replica's key") {
  UsigInstance two = make_instance(2);
  UsigInstance three = make_instance(3);
  Bytes m = {9, 9, 9};
  UsigCertificate cert = two.create_ui(m);
  REQUIRE(verify_ui(two.public_key(), m, cert));
  REQUIRE_FALSE(verify_ui(three.public_key(), m, cert));
}

TEST_CASE("honest instances cannot bind one counter to two digests") {
  // In honest mode each counter is consumed exactly once, so two verifying
  // certificates with equal (replica, counter) but different digests cannot
  // both come from create_ui.
  UsigInstance usig = make_instance(4);
  std::set<std::uint64_t> used;
  for (int i = 0; i < 50; ++i) {
    Bytes m = {static_cast<std::uint8_t>(i)};
    UsigCertificate c = usig.create_ui(m);
    REQUIRE(used.insert(c.counter).second);
  }
}

TEST_CASE("compromised mode can repeat a counter for different digests") {
  UsigInstance usig = make_instance(5, UsigMode::kCompromised);
  Bytes m1 = {1}, m2 = {2};
  UsigCertificate a = usig.create_ui_with_counter(1, m1);
  UsigCertificate b = usig.create_ui_with_counter(1, m2);
  REQUIRE(a.counter == b.counter);
  REQUIRE(a.message_digest != b.message_digest);
  // Both verify: this is what makes hybrid-model equivocation possible.
  REQUIRE(verify_ui(usig.public_key(), m1, a));
  REQUIRE(verify_ui(usig.public_key(), m2, b));
}

TEST_CASE("honest instances refuse scripted counters") {
  UsigInstance usig = make_instance(6);
  Bytes m = {1};
  REQUIRE_THROWS_AS(usig.create_ui_with_counter(5, m), std::logic_error);
}
