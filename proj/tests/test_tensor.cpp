#include <catch2/catch_amalgamated.hpp>

#include "rimeforge/tensor.hpp"

using namespace rimeforge;

TEST_CASE("tensor: shape/data invariant", "[tensor]") {
  Tensor<double> t({2, 3});
  REQUIRE(t.numel() == 6);
  REQUIRE(t.rank() == 2);
  REQUIRE_THROWS_AS(Tensor<double>({2, 2}, {1.0, 2.0, 3.0}), Error);
}

TEST_CASE("tensor: scalar convention", "[tensor]") {
  auto s = Tensor<double>::scalar(3.5);
  REQUIRE(s.is_scalar());
  REQUIRE(s.numel() == 1);
  REQUIRE(s.rank() == 0);
}

TEST_CASE("tensor: cast preserves shape", "[tensor]") {
  auto t = Tensor<float>::row({1.5f, 2.5f});
  auto d = t.cast<double>();
  REQUIRE(d.shape == t.shape);
  REQUIRE(d.data[1] == 2.5);
}

TEST_CASE("param store: ordered names, duplicate rejected", "[tensor]") {
  ParamStore<double> ps;
  ps.add("a", Tensor<double>::zeros({2, 2}));
  ps.add("b", Tensor<double>::zeros({3}));
  REQUIRE(ps.size() == 2);
  REQUIRE(ps.total_count() == 7);
  REQUIRE(ps.find("b") == 1);
  REQUIRE(ps.find("c") == -1);
  REQUIRE_THROWS_AS(ps.add("a", Tensor<double>::zeros({1})), Error);
}
