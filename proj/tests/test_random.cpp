#include "test_util.hpp"

#include <moeload/random.hpp>

#include <cmath>

using namespace moeload;

TEST_CASE("splitmix64 reference values") {
  std::uint64_t state = 0;
  CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(state) == 0x6e789e6aa1b965f4ULL);
}

TEST_CASE("xoshiro256: determinism and independent substreams") {
  Xoshiro256 a(42);
  Xoshiro256 b(42);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());

  Xoshiro256 s0(42, 0);
  Xoshiro256 s1(42, 1);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += s0() == s1();
  CHECK(equal == 0);
}

TEST_CASE("uniform lies in the open unit interval with the right mean") {
  Xoshiro256 rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal moments") {
  Xoshiro256 rng(2);
  const int n = 200000;
  double s1 = 0.0;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
  }
  CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("binomial moments in both sampling regimes") {
  struct Case {
    std::int64_t n;
    double p;
  };
  for (const auto c : {Case{20, 0.1}, Case{262144, 1.0 / 128.0}, Case{1000, 0.5}, Case{65536, 0.9},
                       Case{50, 0.15}}) {
    Xoshiro256 rng(static_cast<std::uint64_t>(c.n));
    const int draws = 40000;
    double s1 = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const auto x = rng.binomial(c.n, c.p);
      REQUIRE(x >= 0);
      REQUIRE(x <= c.n);
      s1 += static_cast<double>(x);
      s2 += static_cast<double>(x) * static_cast<double>(x);
    }
    const double mean = s1 / draws;
    const double var = s2 / draws - mean * mean;
    const double true_var = static_cast<double>(c.n) * c.p * (1.0 - c.p);
    CAPTURE(c.n);
    CAPTURE(c.p);
    CHECK(std::abs(mean - static_cast<double>(c.n) * c.p) < 5.0 * std::sqrt(true_var / draws));
    CHECK(std::abs(var / true_var - 1.0) < 0.05);
  }
}

TEST_CASE("binomial edge cases") {
  Xoshiro256 rng(3);
  CHECK(rng.binomial(0, 0.3) == 0);
  CHECK(rng.binomial(10, 0.0) == 0);
  CHECK(rng.binomial(10, 1.0) == 10);
  CHECK_THROWS_CODE(rng.binomial(-1, 0.5), ErrorCode::kInvalidArgument);
  CHECK_THROWS_CODE(rng.binomial(5, 1.5), ErrorCode::kInvalidArgument);
}
