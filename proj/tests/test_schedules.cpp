#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "blocksplit/errors.hpp"
#include "blocksplit/schedules.hpp"
#include "oracles.hpp"

using namespace blocksplit;

namespace {

std::vector<Block> materialize(const BlockSchedule& s, std::size_t horizon) {
  std::vector<Block> blocks;
  for (std::size_t n = 0; n < horizon; ++n) blocks.push_back(s.block(n));
  return blocks;
}

} // namespace

TEST(Schedule, CyclicBlocksAndPeriod) {
  const BlockSchedule s = make_cyclic(5, 2);
  EXPECT_EQ(s.covering_constant(), 3u);
  EXPECT_EQ(s.block(0), (Block{0, 1}));
  EXPECT_EQ(s.block(1), (Block{2, 3}));
  EXPECT_EQ(s.block(2), (Block{4}));
  EXPECT_EQ(s.block(3), (Block{0, 1}));
  EXPECT_TRUE(validate_covering(s, 100).ok);
  EXPECT_THROW(make_cyclic(3, 0), DomainError);
  EXPECT_THROW(make_cyclic(3, 4), DomainError);
}

TEST(Schedule, FullIsOneBlock) {
  const BlockSchedule s = make_full(4);
  EXPECT_EQ(s.covering_constant(), 1u);
  EXPECT_EQ(s.block(17), (Block{0, 1, 2, 3}));
}

TEST(Schedule, BlocksAreNormalized) {
  const BlockSchedule s(3, 1, [](std::size_t) { return Block{2, 0, 2, 1}; });
  EXPECT_EQ(s.block(0), (Block{0, 1, 2}));
  const BlockSchedule empty(3, 1, [](std::size_t) { return Block{}; });
  EXPECT_THROW(empty.block(0), CoveringError);
  const BlockSchedule out(3, 1, [](std::size_t) { return Block{3}; });
  EXPECT_THROW(out.block(0), CoveringError);
}

TEST(Schedule, CoveringViolationIsReported) {
  // cyclic singletons over m = 3 declared with K = 2
  const BlockSchedule s = make_explicit(3, 2, {{0}, {1}, {2}});
  const CoveringReport r = validate_covering(s, 10);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(*r.window_start, 0u);
  EXPECT_EQ(*r.missing_index, 2u);
  EXPECT_THROW(require_covering(s, 10), CoveringError);
  EXPECT_TRUE(validate_covering(make_explicit(3, 3, {{0}, {1}, {2}}), 10).ok);
}

TEST(Schedule, LateViolationIsFound) {
  const BlockSchedule s(2, 2, [](std::size_t n) { return n < 50 ? Block{n % 2} : Block{0}; });
  const CoveringReport r = validate_covering(s, 100);
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(*r.window_start, 50u);
  EXPECT_EQ(*r.missing_index, 1u);
  EXPECT_TRUE(validate_covering(s, 50).ok);
}

// Property: validate_covering agrees with window enumeration on random schedules.
TEST(Schedule, CoveringMatchesEnumeration) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng() % 5, K = 1 + rng() % 4, horizon = K + rng() % 20;
    std::vector<Block> blocks(horizon);
    for (auto& b : blocks) {
      for (std::size_t i = 0; i < m; ++i)
        if (rng() % 2) b.push_back(i);
      if (b.empty()) b.push_back(rng() % m);
    }
    const BlockSchedule s(m, K, [blocks](std::size_t n) { return blocks.at(n); });
    EXPECT_EQ(validate_covering(s, horizon).ok, oracle::windows_cover(blocks, m, K)) << "trial " << trial;
  }
}

// Property: quasicyclic schedules cover every K-window and are reproducible.
TEST(Schedule, QuasicyclicCoversAndIsDeterministic) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t m = 1 + seed % 7, K = 1 + seed % 4;
    const BlockSchedule a = make_quasicyclic_random(m, K, seed);
    const BlockSchedule b = make_quasicyclic_random(m, K, seed);
    const auto blocks = materialize(a, 300);
    EXPECT_TRUE(oracle::windows_cover(blocks, m, K)) << "seed " << seed;
    EXPECT_EQ(blocks, materialize(b, 300));
    // random access after the fact returns the cached block
    EXPECT_EQ(a.block(123), blocks[123]);
  }
}

TEST(Schedule, LastActivationMatchesEnumeration) {
  const BlockSchedule s = make_quasicyclic_random(5, 3, 42);
  const auto blocks = materialize(s, 100);
  for (std::size_t n = 2; n < 100; ++n)
    for (std::size_t i = 0; i < 5; ++i)
      EXPECT_EQ(last_activation(s, i, n), *oracle::last_activation(blocks, i, n, 3));
  EXPECT_THROW(last_activation(s, 0, 1), DomainError);
  EXPECT_THROW(last_activation(make_explicit(2, 1, {{0}, {1}}), 1, 0), CoveringError);
}

TEST(ConcentratingArray, TwoOperatorExample) {
  const BlockSchedule s = make_explicit(2, 2, {{0}, {1}});
  const std::vector<double> w{0.3, 0.7};
  const ConcentratingRow row = mu_row(s, w, 1);
  EXPECT_DOUBLE_EQ(row.at(0), 0.3);
  EXPECT_DOUBLE_EQ(row.at(1), 0.7);
}

TEST(ConcentratingArray, EarlyRowsAreUnitMass) {
  const BlockSchedule s = make_cyclic(4, 1);  // K = 4
  const std::vector<double> w{0.25, 0.25, 0.25, 0.25};
  for (std::size_t n = 0; n + 1 < 4; ++n) {
    const ConcentratingRow row = mu_row(s, w, n);
    ASSERT_EQ(row.entries.size(), 1u);
    EXPECT_EQ(row.entries[0].first, n);
    EXPECT_DOUBLE_EQ(row.entries[0].second, 1.0);
  }
}

TEST(ConcentratingArray, FullActivationIsIdentityRow) {
  const BlockSchedule s = make_full(3);
  const std::vector<double> w{0.2, 0.3, 0.5};
  for (std::size_t n = 0; n < 10; ++n) {
    const ConcentratingRow row = mu_row(s, w, n);
    ASSERT_EQ(row.entries.size(), 1u);
    EXPECT_NEAR(row.at(n), 1.0, 1e-15);
  }
}

TEST(ConcentratingArray, CheckerFlagsBadRows) {
  ConcentratingRow good{3, {{2, 0.4}, {3, 0.6}}};
  ConcentratingRow short_sum{4, {{4, 0.5}}};
  ConcentratingRow wide{5, {{1, 0.5}, {5, 0.5}}};
  ConcentratingRow no_diag{6, {{5, 1.0}}};
  EXPECT_TRUE(check_concentrating(std::vector<ConcentratingRow>{good}, 2).passed);
  const auto r1 = check_concentrating(std::vector<ConcentratingRow>{good, short_sum}, 2);
  EXPECT_FALSE(r1.row_stochastic);
  EXPECT_EQ(*r1.first_sum_failure, 4u);
  const auto r2 = check_concentrating(std::vector<ConcentratingRow>{wide}, 2);
  EXPECT_FALSE(r2.banded);
  const auto r3 = check_concentrating(std::vector<ConcentratingRow>{no_diag}, 2);
  EXPECT_FALSE(r3.diagonal_bounded_below);
}

// Property: mu rows match the set-difference definition, pass the
// concentrating checks, and satisfy the lag identity.
TEST(ConcentratingArray, RandomSchedulesProperty) {
  std::mt19937_64 rng(21);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t m = 1 + seed % 6, K = 1 + seed % 4;
    const BlockSchedule s = make_quasicyclic_random(m, K, seed + 100);
    std::vector<double> w(m);
    double total = 0.0;
    for (auto& v : w) total += (v = 0.1 + static_cast<double>(rng() % 100));
    for (auto& v : w) v /= total;
    const auto blocks = materialize(s, 60);
    std::vector<ConcentratingRow> rows;
    std::vector<double> xs;
    for (std::size_t n = 0; n < 60; ++n) {
      rows.push_back(mu_row(s, w, n));
      for (std::size_t j = 0; j <= n; ++j)
        EXPECT_NEAR(rows.back().at(j), oracle::mu_entry(blocks, w, n, j, K), 1e-15);
      xs.push_back(std::normal_distribution<double>()(rng));
      if (n + 1 >= K) {
        EXPECT_TRUE(lag_identity_check(s, w, n, xs, 1e-12)) << "seed " << seed << " n " << n;
      }
    }
    const ConcentratingReport rep = check_concentrating(rows, K);
    EXPECT_TRUE(rep.passed) << "seed " << seed;
    const double wmin = *std::min_element(w.begin(), w.end());
    EXPECT_GE(rep.diagonal_infimum, wmin - 1e-15);
  }
}

TEST(LagIdentity, RejectsBadInput) {
  const BlockSchedule s = make_cyclic(2, 1);
  const std::vector<double> w{0.5, 0.5};
  EXPECT_THROW(lag_identity_sides(s, w, 3, std::vector<double>{1, 2}), DimensionError);
  EXPECT_THROW(lag_identity_sides(s, w, 0, std::vector<double>{1}), DomainError);
}
