#include <catch2/catch_amalgamated.hpp>

#include "rimeforge/rng.hpp"

using namespace rimeforge;

TEST_CASE("rng: same seed and stream reproduce the sequence", "[rng]") {
  Rng a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: streams are independent", "[rng]") {
  Rng a(42, 0), b(42, 1);
  int agree = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++agree;
  REQUIRE(agree == 0);
}

TEST_CASE("rng: split derives a reproducible child stream", "[rng]") {
  Rng parent(9, 3);
  Rng c1 = parent.split(11);
  Rng c2 = Rng(9, 3).split(11);
  for (int i = 0; i < 32; ++i) REQUIRE(c1.next_u64() == c2.next_u64());
}

TEST_CASE("rng: doubles lie in [0,1)", "[rng]") {
  Rng r(1, 1);
  for (int i = 0; i < 10000; ++i) {
    double x = r.next_double();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
}

TEST_CASE("rng: next_below stays in range and covers values", "[rng]") {
  Rng r(5, 5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    uint64_t v = r.next_below(7);
    REQUIRE(v < 7);
    ++counts[static_cast<size_t>(v)];
  }
  for (int c : counts) REQUIRE(c > 0);
}
