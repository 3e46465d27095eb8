#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "bilinear/rng.hpp"

using bilinear::Rng;

TEST(Philox, MatchesReferenceKnownAnswers) {
  using A = std::array<std::uint32_t, 4>;
  EXPECT_EQ(bilinear::detail::philox4x32_10({0, 0, 0, 0}, 0, 0),
            (A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(bilinear::detail::philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                                            0xffffffff, 0xffffffff),
            (A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(bilinear::detail::philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                                            0xa4093822, 0x299f31d0),
            (A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, DerivedStreamsArePureAndDistinct) {
  const Rng root(7);
  Rng x1 = root.derive("noise").derive(3);
  Rng x2 = root.derive("noise").derive(3);
  Rng y = root.derive("noise").derive(4);
  Rng z = root.derive("selection").derive(3);
  EXPECT_EQ(x1.key(), x2.key());
  EXPECT_NE(x1.key(), y.key());
  EXPECT_NE(x1.key(), z.key());
  for (int i = 0; i < 100; ++i) ASSERT_EQ(x1(), x2());
  // Deriving does not advance the parent.
  Rng p(9), q(9);
  (void)p.derive("anything");
  EXPECT_EQ(p(), q());
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Rng, NormalMoments) {
  Rng rng(2);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.015);
}

TEST(Rng, RademacherIsPlusMinusOne) {
  Rng rng(3);
  int plus = 0;
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.rademacher();
    ASSERT_TRUE(v == 1.0 || v == -1.0);
    plus += v > 0;
  }
  EXPECT_NEAR(plus / 10000.0, 0.5, 0.03);
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  Rng rng(4);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}
