#include <catch2/catch.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "fdaclass/numeric.hpp"
#include "fdaclass/rng.hpp"

using fdaclass::Rng;

TEST_CASE("derived streams do not collide across master seeds", "[rng]") {
  // masters and streams with equal sums must still produce distinct seeds
  CHECK(Rng::derive(1, 2) != Rng::derive(2, 1));
  CHECK(Rng::derive(0, 5) != Rng::derive(5, 0));
  CHECK(Rng::derive(3, 4, 1) != Rng::derive(3, 5, 0));

  std::set<std::uint64_t> seen;
  for (std::uint64_t master = 0; master < 64; ++master) {
    for (std::uint64_t stream = 0; stream < 64; ++stream) {
      seen.insert(Rng::derive(master, stream));
    }
  }
  CHECK(seen.size() == 64 * 64);
}

TEST_CASE("derivation is a pure function of its arguments", "[rng]") {
  CHECK(Rng::derive(7, 9, 2) == Rng::derive(7, 9, 2));
  CHECK(Rng::derive(7, 9, 2) != Rng::derive(7, 9, 3));
}

TEST_CASE("uniform integers cover their range without bias artifacts", "[rng]") {
  Rng rng(5);
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const int v = rng.uniform_int(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) {
    CHECK(std::abs(c - draws / 7) < 5 * std::sqrt(static_cast<double>(draws) / 7));
  }
}

TEST_CASE("normal and exponential variates have the right moments", "[rng]") {
  Rng rng(11);
  const int n = 200000;
  std::vector<double> normals(static_cast<std::size_t>(n)), exps(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    normals[static_cast<std::size_t>(i)] = rng.normal();
    exps[static_cast<std::size_t>(i)] = rng.exponential();
  }
  const auto nstats = fdaclass::mean_sd(normals);
  CHECK(std::abs(nstats.mean) < 0.01);
  CHECK(nstats.sd == Approx(1.0).epsilon(0.01));
  const auto estats = fdaclass::mean_sd(exps);
  CHECK(estats.mean == Approx(1.0).epsilon(0.01));
  CHECK(estats.sd == Approx(1.0).epsilon(0.02));

  // shuffling is a permutation
  std::vector<int> xs{1, 2, 3, 4, 5, 6, 7, 8};
  rng.shuffle(xs);
  std::set<int> unique(xs.begin(), xs.end());
  CHECK(unique.size() == 8);
}
