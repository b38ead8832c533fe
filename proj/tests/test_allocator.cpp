#include "oracles.hpp"
#include "test_util.hpp"

#include <moeload/allocator.hpp>

#include <cmath>
#include <random>

using namespace moeload;

namespace {

std::int64_t sum(const std::vector<std::int64_t>& v) {
  std::int64_t s = 0;
  for (auto x : v) s += x;
  return s;
}

double l1(const std::vector<std::int64_t>& units, const VecX& targets) {
  double d = 0.0;
  for (std::size_t j = 0; j < units.size(); ++j) {
    d += std::abs(static_cast<double>(units[j]) - targets(static_cast<Index>(j)));
  }
  return d;
}

VecX vec(std::initializer_list<double> values) {
  return oracle::to_eigen(std::vector<double>(values));
}

}  // namespace

TEST_CASE("allocate: examples") {
  CHECK(allocate(vec({0.5, 0.5}), 4).units_per_expert == std::vector<std::int64_t>{2, 2});
  CHECK(allocate(vec({0.7, 0.2, 0.1}), 10).units_per_expert == std::vector<std::int64_t>{7, 2, 1});
  const auto plan = allocate(VecX::Constant(128, 1.0 / 128.0), 128, 0, 6);
  CHECK(plan.layer_id == 6);
  CHECK(plan.total_units == 128);
  CHECK(plan.mode == AllocationMode::kProportional);
  CHECK(std::all_of(plan.units_per_expert.begin(), plan.units_per_expert.end(),
                    [](std::int64_t u) { return u == 1; }));
}

TEST_CASE("allocate: ties go to the lower index") {
  CHECK(allocate(vec({0.25, 0.25, 0.25, 0.25}), 2).units_per_expert ==
        std::vector<std::int64_t>{1, 1, 0, 0});
  CHECK(allocate(vec({1.0 / 3, 1.0 / 3, 1.0 / 3}), 4).units_per_expert ==
        std::vector<std::int64_t>{2, 1, 1});
}

TEST_CASE("allocate: minimum units") {
  const auto plan = allocate(vec({0.9, 0.05, 0.05}), 10, 2);
  CHECK(plan.units_per_expert == std::vector<std::int64_t>{6, 2, 2});
  CHECK_THROWS_CODE(allocate(vec({0.5, 0.5}), 3, 2), ErrorCode::kInfeasibleMinimum);
  CHECK_THROWS_CODE(allocate(vec({0.5, 0.4}), 3), ErrorCode::kInvalidArgument);
  CHECK_THROWS_CODE(allocate(vec({1.2, -0.2}), 3), ErrorCode::kInvalidArgument);
}

TEST_CASE("largest_remainder equals exhaustive L1-optimal apportionment for E <= 5") {
  std::mt19937_64 rng(77);
  int cases = 0;
  for (std::size_t e = 1; e <= 5; ++e) {
    for (std::int64_t total = 0; total <= 20; ++total) {
      for (int rep = 0; rep < 10; ++rep) {
        const VecX p = oracle::to_eigen(oracle::random_simplex(rng, e));
        const VecX targets = p * static_cast<double>(total);
        const auto units = allocate(p, total).units_per_expert;
        CHECK(sum(units) == total);
        CHECK(l1(units, targets) <= oracle::best_l1_apportionment(oracle::to_std(targets), total) + 1e-9);
        ++cases;
      }
    }
  }
  CHECK(cases == 5 * 21 * 10);

  // Totals of 100 with small E.
  for (int rep = 0; rep < 20; ++rep) {
    const VecX p = oracle::to_eigen(oracle::random_simplex(rng, 3));
    const auto units = allocate(p, 100).units_per_expert;
    CHECK(l1(units, p * 100.0) <= oracle::best_l1_apportionment(oracle::to_std(p * 100.0), 100) + 1e-9);
  }
}

TEST_CASE("allocate: sum and quota on larger random cases") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> experts(2, 256);
  std::uniform_int_distribution<std::int64_t> units(0, 100000);
  for (int rep = 0; rep < 1000; ++rep) {
    const VecX p = oracle::to_eigen(oracle::random_simplex(rng, experts(rng)));
    const std::int64_t total = units(rng);
    const auto plan = allocate(p, total);
    CHECK(sum(plan.units_per_expert) == total);
    const VecX targets = p / p.sum() * static_cast<double>(total);
    bool quota = true;
    for (Index j = 0; j < p.size(); ++j) {
      const auto u = static_cast<double>(plan.units_per_expert[static_cast<std::size_t>(j)]);
      quota = quota && std::floor(targets(j)) <= u && u <= std::ceil(targets(j));
    }
    CHECK(quota);

    // The expert with the largest share never receives fewer units than any other.
    Index top = 0;
    p.maxCoeff(&top);
    const auto top_units = plan.units_per_expert[static_cast<std::size_t>(top)];
    CHECK(top_units == *std::max_element(plan.units_per_expert.begin(), plan.units_per_expert.end()));
  }
}

TEST_CASE("largest_remainder: degenerate inputs") {
  CHECK(largest_remainder(VecX(0), 0).empty());
  CHECK_THROWS_CODE(largest_remainder(VecX(0), 3), ErrorCode::kInvalidArgument);
  CHECK_THROWS_CODE(largest_remainder(vec({-1.0, 2.0}), 1), ErrorCode::kInvalidArgument);
  CHECK(largest_remainder(vec({1.5, 1.5}), 3) == std::vector<std::int64_t>{2, 1});
}

TEST_CASE("headroom_allocate") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    const VecX p = oracle::to_eigen(oracle::random_simplex(rng, 16));
    const auto plain = allocate(p, 1000, 1);
    const auto padded = headroom_allocate(p, VecX::Zero(16), 1000, 1);
    CHECK(padded.units_per_expert == plain.units_per_expert);
    CHECK(padded.mode == AllocationMode::kHeadroom);
  }

  VecX range = VecX::Zero(8);
  range(3) = 0.5;
  const VecX uniform = VecX::Constant(8, 0.125);
  const auto plan = headroom_allocate(uniform, range, 80);
  CHECK(plan.units_per_expert[3] >= allocate(uniform, 80).units_per_expert[3]);
  CHECK(plan.units_per_expert[3] == 33);
  CHECK(sum(plan.units_per_expert) == 80);

  CHECK_THROWS_CODE(headroom_allocate(uniform, VecX::Zero(3), 80), ErrorCode::kInvalidArgument);
  CHECK_THROWS_CODE(headroom_allocate(uniform, -range, 80), ErrorCode::kInvalidArgument);
  CHECK_THROWS_CODE(headroom_allocate(uniform, range, 7, 1), ErrorCode::kInfeasibleMinimum);
}
