#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "gfm/random.hpp"

namespace gfm {
namespace {

TEST(Random, DeriveSeedSeparatesPaths) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 30; ++a)
    for (std::uint64_t b = 0; b < 30; ++b) seen.insert(derive_seed(1, {a, b}));
  EXPECT_EQ(seen.size(), 900u);
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
  EXPECT_NE(derive_seed(1, {}), derive_seed(1, {0}));
  EXPECT_EQ(derive_seed(9, {4, 5}), derive_seed(9, {4, 5}));
}

TEST(Random, Mix64KnownValue) {
  // First SplitMix64 output for state 0.
  EXPECT_EQ(mix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Random, UniformMomentsAndRange) {
  Rng rng(3);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum2 += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sum2 / n - (sum / n) * (sum / n), 1.0 / 12.0, 2e-3);
}

TEST(Random, GaussianMoments) {
  Rng rng(4);
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian(2.0);
    sum += g;
    sum2 += g * g;
    sum4 += g * g * g * g;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 * 2.0 / std::sqrt(n));
  EXPECT_NEAR(sum2 / n, 4.0, 0.05);
  EXPECT_NEAR(sum4 / n / 16.0, 3.0, 0.1);  // kurtosis of a normal
}

TEST(Random, SameSeedSameStream) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.gaussian(), b.gaussian());
  EXPECT_FALSE(Rng(5).bernoulli(0.0));
  EXPECT_TRUE(Rng(5).bernoulli(1.0));
}

}  // namespace
}  // namespace gfm
