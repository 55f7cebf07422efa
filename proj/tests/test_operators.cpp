#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "blocksplit/calculus.hpp"
#include "blocksplit/errors.hpp"
#include "blocksplit/operators.hpp"
#include "oracles.hpp"

using namespace blocksplit;

namespace {

Point vec(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) p[k++] = x;
  return p;
}

} // namespace

TEST(Weights, AcceptsValidAndRejectsInvalid) {
  EXPECT_NO_THROW(validate_weights(std::vector<double>{0.25, 0.75}));
  EXPECT_NO_THROW(validate_weights(std::vector<double>{0.5, 0.5 + 5e-13}));
  EXPECT_THROW(validate_weights(std::vector<double>{}), DomainError);
  EXPECT_THROW(validate_weights(std::vector<double>{0.0, 1.0}), DomainError);
  EXPECT_THROW(validate_weights(std::vector<double>{-0.5, 1.5}), DomainError);
  EXPECT_THROW(validate_weights(std::vector<double>{0.5, 0.6}), DomainError);
  EXPECT_THROW(validate_weights(std::vector<double>{NAN, 1.0}), DomainError);
}

TEST(WeightedSum, MatchesNaiveSum) {
  std::mt19937_64 rng(3);
  std::vector<Point> terms;
  std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 4; ++i) terms.push_back(oracle::random_vec(rng, 6));
  Point naive = Point::Zero(6);
  for (int i = 0; i < 4; ++i) naive += w[i] * terms[i];
  EXPECT_LE((weighted_sum(terms, w) - naive).norm(), 1e-15);
}

TEST(WeightedSum, CompensatesCancellation) {
  std::vector<Point> terms{vec({3e16}), vec({3.0}), vec({-3e16})};
  std::vector<double> w{1.0 / 3, 1.0 / 3, 1.0 / 3};
  EXPECT_NEAR(weighted_sum(terms, w)[0], 1.0, 1e-15);
}

TEST(WeightedSum, RejectsMismatches) {
  std::vector<Point> terms{vec({1, 2}), vec({1})};
  std::vector<double> w{0.5, 0.5};
  EXPECT_THROW(weighted_sum(terms, w), DimensionError);
  EXPECT_THROW(weighted_sum(std::vector<Point>{vec({1})}, w), DimensionError);
}

TEST(AveragedOp, ConstructorValidatesConstants) {
  auto id = [](const Point& x) { return x; };
  EXPECT_THROW(AveragedOp(2, id, 0.0), DomainError);
  EXPECT_THROW(AveragedOp(2, id, 1.5), DomainError);
  EXPECT_THROW(AveragedOp(2, id, 0.5, 1.2), DomainError);
  EXPECT_THROW(AveragedOp(0, id, 0.5), DomainError);
  EXPECT_NO_THROW(AveragedOp(2, id, 1.0, 0.0));
}

TEST(AveragedOp, ApplyChecksDimensionAndFiniteness) {
  const AveragedOp id = identity(2);
  EXPECT_THROW(apply(id, vec({1, 2, 3})), DimensionError);
  const AveragedOp bad(2, [](const Point& x) { return Point(x / 0.0); }, 0.5);
  EXPECT_THROW(apply(bad, vec({1, 0})), NonFiniteError);
  const AveragedOp shrink(2, [](const Point&) { return vec({1}); }, 0.5);
  EXPECT_THROW(apply(shrink, vec({1, 0})), NonFiniteError);
}

TEST(AveragedOp, IdentityAndScalingConstants) {
  EXPECT_DOUBLE_EQ(identity(3).alpha(), 0.5);
  EXPECT_DOUBLE_EQ(*identity(3).lipschitz(), 1.0);
  const AveragedOp half = scaling(2, 0.5);
  EXPECT_DOUBLE_EQ(half.alpha(), 0.25);
  EXPECT_DOUBLE_EQ(*half.lipschitz(), 0.5);
  EXPECT_EQ(apply(half, vec({2, -4})), vec({1, -2}));
  EXPECT_DOUBLE_EQ(scaling(2, -1.0).alpha(), 1.0);
  EXPECT_THROW(scaling(2, 1.5), DomainError);
}

TEST(AveragedOp, ConvexCombinationConstants) {
  std::vector<AveragedOp> ops{scaling(2, 0.5), identity(2)};
  std::vector<double> w{0.5, 0.5};
  const AveragedOp c = convex_combination(ops, w);
  EXPECT_DOUBLE_EQ(c.alpha(), 0.5);
  EXPECT_DOUBLE_EQ(*c.lipschitz(), 0.75);
  EXPECT_LE((apply(c, vec({4, 8})) - vec({3, 6})).norm(), 1e-15);
}

TEST(AveragedOp, ComposeStoresAlphaOne) {
  const AveragedOp c = compose(scaling(2, 0.5), scaling(2, 0.5));
  EXPECT_DOUBLE_EQ(c.alpha(), 1.0);
  EXPECT_DOUBLE_EQ(*c.lipschitz(), 0.25);
  EXPECT_EQ(apply(c, vec({4, 8})), vec({1, 2}));
  EXPECT_THROW(compose(identity(2), identity(3)), DimensionError);
}

TEST(AveragedOp, RelaxScalesAlpha) {
  const AveragedOp p = projector(ConvexSet::ball(vec({0, 0}), 1.0));
  const AveragedOp r = relax(p, 1.5);
  EXPECT_DOUBLE_EQ(r.alpha(), 0.75);
  EXPECT_THROW(relax(p, 2.5), DomainError);
  EXPECT_THROW(relax(p, 0.0), DomainError);
  // x + 1.5 (Px - x) for x = (3, 0): P x = (1, 0)
  EXPECT_LE((apply(r, vec({3, 0})) - vec({0, 0})).norm(), 1e-15);
}

TEST(Certificate, FirmlyNonexpansiveOperatorsPass) {
  EXPECT_TRUE(certify_averaged(identity(3), 2000, 1).passed);
  EXPECT_TRUE(certify_averaged(projector(ConvexSet::ball(vec({1, 0, 0}), 2.0)), 2000, 2).passed);
  EXPECT_TRUE(certify_averaged(scaling(3, -1.0), 2000, 3).passed);
}

TEST(Certificate, NegationFailsAtOneHalf) {
  const CertificateReport r = certify_averaged_at(scaling(2, -1.0), 0.5, 500, 4);
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.failures, r.samples);
}

TEST(Certificate, ExpansiveMapFailsDeclaredLipschitz) {
  const AveragedOp twice(2, [](const Point& x) { return Point(2.0 * x); }, 1.0, 1.0, "twice");
  const CertificateReport r = certify_averaged(twice, 500, 5);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.lipschitz_failures, 0u);
}

TEST(Certificate, OverclaimedAlphaIsCaught) {
  // reflection 2P - Id is nonexpansive but not better than 1-averaged
  const AveragedOp p = projector(ConvexSet::halfspace(vec({1, 1}), 0.0));
  const AveragedOp refl(2, [p](const Point& x) { return Point(2.0 * p(x) - x); }, 0.6, 1.0, "reflection");
  EXPECT_FALSE(certify_averaged(refl, 2000, 6).passed);
  EXPECT_TRUE(certify_averaged_at(refl, 1.0, 2000, 6).passed);
}

// Property: relaxing a projector by lambda in (0, 2) yields a lambda/2-averaged map.
TEST(Certificate, RelaxedProjectorsProperty) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lam(0.05, 1.99);
  for (int trial = 0; trial < 20; ++trial) {
    const Point a = oracle::random_vec(rng, 4);
    const AveragedOp r = relax(projector(ConvexSet::halfspace(a, 0.3)), lam(rng));
    EXPECT_TRUE(certify_averaged(r, 500, static_cast<std::uint64_t>(trial)).passed) << "trial " << trial;
  }
}

// Property: convex combinations of certified operators certify at max alpha.
TEST(Certificate, ConvexCombinationProperty) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<AveragedOp> ops{projector(ConvexSet::ball(oracle::random_vec(rng, 3), 1.0)),
                                scaling(3, 0.3), relax(projector(ConvexSet::hyperplane(oracle::random_vec(rng, 3), 1.0)), 1.6)};
    std::vector<double> w{0.2, 0.3, 0.5};
    EXPECT_TRUE(certify_averaged(convex_combination(ops, w), 500, static_cast<std::uint64_t>(trial)).passed);
  }
}

TEST(Certificate, DeterministicForSeed) {
  const AveragedOp p = projector(ConvexSet::ball(vec({0, 0}), 1.0));
  const auto a = certify_averaged(p, 300, 9);
  const auto b = certify_averaged(p, 300, 9);
  EXPECT_EQ(a.max_violation, b.max_violation);
  EXPECT_THROW(certify_averaged(p, 0, 9), DomainError);
}
