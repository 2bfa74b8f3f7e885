#include <catch2/catch_amalgamated.hpp>

#include <motenc/tensor.hpp>

#include "oracles.hpp"

using motenc::SeededRng;
using motenc::Tensor;

TEST_CASE("matmul identity and hand cases") {
  SeededRng rng(1);
  const Tensor a = oracles::random_tensor({3, 3}, rng);
  const Tensor ia = motenc::matmul(Tensor::identity(3), a);
  REQUIRE(oracles::max_abs_diff(ia, a) == 0.0);

  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor v = Tensor::matrix({{1}, {1}});
  const Tensor r = motenc::matmul(m, v);
  REQUIRE(r(0, 0) == 3.0);
  REQUIRE(r(1, 0) == 7.0);
}

TEST_CASE("matmul matches the naive triple-loop oracle") {
  SeededRng rng(7);
  const Tensor a = oracles::random_tensor({5, 7}, rng);
  const Tensor b = oracles::random_tensor({7, 2}, rng);
  const Tensor got = motenc::matmul(a, b);
  const Tensor want = oracles::naive_matmul(a, b);
  REQUIRE(oracles::max_rel_err(got, want) < 1e-12);
}

TEST_CASE("matmul shape errors name both shapes") {
  const Tensor a({2, 3});
  const Tensor b({4, 2});
  try {
    motenc::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const motenc::ShapeError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("[2x3]") != std::string::npos);
    REQUIRE(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random triples") {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = oracles::random_tensor({4, 6}, rng);
    const Tensor b = oracles::random_tensor({6, 5}, rng);
    const Tensor c = oracles::random_tensor({5, 3}, rng);
    const Tensor left = motenc::matmul(motenc::matmul(a, b), c);
    const Tensor right = motenc::matmul(a, motenc::matmul(b, c));
    REQUIRE(oracles::max_rel_err(left, right) < 1e-9);
  }
}

TEST_CASE("transposed matmul variants agree with explicit transposes") {
  SeededRng rng(13);
  const Tensor a = oracles::random_tensor({4, 6}, rng);
  const Tensor b = oracles::random_tensor({5, 6}, rng);
  REQUIRE(oracles::max_rel_err(motenc::matmul_nt(a, b),
                               oracles::naive_matmul(a, motenc::transpose(b))) < 1e-12);
  const Tensor c = oracles::random_tensor({6, 4}, rng);
  const Tensor d = oracles::random_tensor({6, 5}, rng);
  REQUIRE(oracles::max_rel_err(motenc::matmul_tn(c, d),
                               oracles::naive_matmul(motenc::transpose(c), d)) < 1e-12);
}

TEST_CASE("tensor shape validation") {
  REQUIRE_THROWS_AS(Tensor(motenc::Shape{}), motenc::ShapeError);
  REQUIRE_THROWS_AS(Tensor({1, 2, 3, 4, 5}), motenc::ShapeError);
  REQUIRE_THROWS_AS(Tensor({3, 0}), motenc::ShapeError);
  REQUIRE_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), motenc::ShapeError);
  REQUIRE_THROWS_AS(Tensor({4}).reshaped({3}), motenc::ShapeError);
  REQUIRE_NOTHROW(Tensor({2, 3}).reshaped({6}));
}

TEST_CASE("sparse gaussian init: exact column counts") {
  SeededRng rng(3);
  SECTION("nonzeros equal to fan_in gives a dense column") {
    const Tensor w = motenc::sample_sparse_gaussian(rng, 6, 4, 6, 1.0);
    for (std::size_t col = 0; col < 4; ++col) {
      for (std::size_t row = 0; row < 6; ++row) REQUIRE(w(row, col) != 0.0);
    }
  }
  SECTION("every column has exactly 15 nonzeros") {
    const Tensor w = motenc::sample_sparse_gaussian(rng, 100, 40, 15, 1.0);
    for (std::size_t col = 0; col < 40; ++col) {
      int nz = 0;
      for (std::size_t row = 0; row < 100; ++row) nz += w(row, col) != 0.0;
      REQUIRE(nz == 15);
    }
  }
  SECTION("out-of-range nonzeros rejected") {
    REQUIRE_THROWS_AS(motenc::sample_sparse_gaussian(rng, 10, 2, 11, 1.0),
                      motenc::ParamError);
    REQUIRE_THROWS_AS(motenc::sample_sparse_gaussian(rng, 10, 2, 0, 1.0),
                      motenc::ParamError);
  }
}

TEST_CASE("sparse gaussian init: sample statistics") {
  SeededRng rng(5);
  // 15 nonzeros per column over 6667 columns gives just over 1e5 samples.
  const Tensor w = motenc::sample_sparse_gaussian(rng, 100, 6667, 15, 1.0);
  double mean = 0.0, count = 0.0;
  for (double v : w.values()) {
    if (v != 0.0) {
      mean += v;
      count += 1.0;
    }
  }
  mean /= count;
  double var = 0.0;
  for (double v : w.values()) {
    if (v != 0.0) var += (v - mean) * (v - mean);
  }
  var /= count;
  REQUIRE(count >= 1e5);
  REQUIRE(std::abs(mean) < 0.02);
  REQUIRE(var > 0.97);
  REQUIRE(var < 1.03);
}

TEST_CASE("seeded rng reproducibility") {
  SeededRng a(99), b(99);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

  SeededRng ra(123), rb(123);
  const Tensor wa = motenc::sample_sparse_gaussian(ra, 50, 20, 7, 0.5);
  const Tensor wb = motenc::sample_sparse_gaussian(rb, 50, 20, 7, 0.5);
  REQUIRE(oracles::max_abs_diff(wa, wb) == 0.0);
}

TEST_CASE("rng permutation is a permutation") {
  SeededRng rng(17);
  const auto p = rng.permutation(50);
  std::vector<bool> seen(50, false);
  for (std::size_t v : p) {
    REQUIRE(v < 50);
    REQUIRE(!seen[v]);
    seen[v] = true;
  }
}
