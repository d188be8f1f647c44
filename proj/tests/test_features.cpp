#include <gtest/gtest.h>

#include <random>

#include "cellguard/cellguard.hpp"
#include "oracles.hpp"

using namespace cellguard;

namespace {

BinaryMask block(int w, int h, Rect r) {
  BinaryMask m(w, h);
  for (int y = r.y; y < r.bottom(); ++y) {
    for (int x = r.x; x < r.right(); ++x) m.set(x, y);
  }
  return m;
}

BinaryMask random_blob(std::mt19937_64& rng, int w, int h) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, rng() % 3 == 0);
  }
  m.set(0, 0);
  return m;
}

}  // namespace

TEST(PercentageHand, Examples) {
  const auto layout = layout_for_crop(100, 100);
  EXPECT_DOUBLE_EQ(percentage_hand(BinaryMask(100, 100), layout), 0.0);
  EXPECT_DOUBLE_EQ(percentage_hand(BinaryMask(100, 100, true), layout), 0.125);
  EXPECT_DOUBLE_EQ(percentage_hand(block(100, 100, layout.hand_left), layout), 0.0625);
}

TEST(RawMoment, Examples) {
  BinaryMask one(10, 10);
  one.set(2, 4);  // 1-based (3, 5)
  EXPECT_EQ(raw_moment(one, 0, 0), 1.0);
  EXPECT_EQ(raw_moment(one, 1, 0), 3.0);
  EXPECT_EQ(raw_moment(one, 0, 1), 5.0);
  EXPECT_EQ(raw_moment(BinaryMask(5, 5), 2, 0), 0.0);
  BinaryMask pair(5, 5);
  pair.set(0, 0);
  pair.set(2, 0);
  EXPECT_EQ(raw_moment(pair, 1, 0), 4.0);
  EXPECT_THROW(raw_moment(pair, 3, 0), InvalidInput);
}

TEST(CentralMoment, Examples) {
  BinaryMask one(10, 10);
  one.set(6, 1);
  EXPECT_EQ(central_moment(one, 2, 0), 0.0);
  EXPECT_EQ(central_moment(one, 0, 2), 0.0);
  BinaryMask pair(5, 5);
  pair.set(0, 0);
  pair.set(2, 0);
  EXPECT_EQ(central_moment(pair, 2, 0), 2.0);
  EXPECT_EQ(central_moment(pair, 0, 2), 0.0);
  EXPECT_THROW(central_moment(BinaryMask(3, 3), 2, 0), EmptyMask);
}

TEST(CentralMoment, TranslationInvariant) {
  const BinaryMask a = block(40, 40, {3, 4, 7, 11});
  const BinaryMask b = block(40, 40, {20, 17, 7, 11});
  for (int p = 0; p <= 2; ++p) {
    for (int q = 0; p + q <= 2; ++q) EXPECT_DOUBLE_EQ(central_moment(a, p, q), central_moment(b, p, q));
  }
}

TEST(MomentOfInertia, SolidSquareApproachesOneSixth) {
  const BinaryMask m = block(220, 220, {10, 10, 200, 200});
  EXPECT_NEAR(moment_of_inertia(m), 1.0 / 6.0, 1e-3);
}

TEST(MomentOfInertia, ExactTranslationInvariance) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const BinaryMask shape = random_blob(rng, 12, 9);
    BinaryMask a(60, 60), b(60, 60);
    const int dx = static_cast<int>(rng() % 40), dy = static_cast<int>(rng() % 40);
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 12; ++x) {
        a.set(x + 2, y + 1, shape.get(x, y));
        b.set(x + dx + 5, y + dy + 7, shape.get(x, y));
      }
    }
    EXPECT_EQ(moment_of_inertia(a), moment_of_inertia(b));
  }
}

TEST(MomentOfInertia, ScaleDriftSmall) {
  // Disc of radius n/2 rendered at n and 2n.
  auto disc = [](int n) {
    BinaryMask m(n, n);
    const double c = (n - 1) / 2.0, r = n / 2.0;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) m.set(x, y, (x - c) * (x - c) + (y - c) * (y - c) <= r * r);
    }
    return m;
  };
  EXPECT_LT(std::abs(moment_of_inertia(disc(64)) - moment_of_inertia(disc(128))), 1e-2);
}

TEST(MomentOfInertia, MatchesNaiveDoubleLoop) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const BinaryMask m = random_blob(rng, 5 + static_cast<int>(rng() % 60), 5 + static_cast<int>(rng() % 60));
    const double fast = moment_of_inertia(m), slow = oracle::naive_mi(m);
    EXPECT_LE(std::abs(fast - slow), 1e-12 * std::abs(slow));
    const MomentSet s = compute_moments(m);
    EXPECT_LE(std::abs(s.mu20 - central_moment(m, 2, 0)), 1e-12 * std::max(1.0, s.mu20));
    EXPECT_LE(std::abs(s.mu02 - central_moment(m, 0, 2)), 1e-12 * std::max(1.0, s.mu02));
    EXPECT_EQ(s.m10, raw_moment(m, 1, 0));
    EXPECT_EQ(s.m02, raw_moment(m, 0, 2));
    EXPECT_DOUBLE_EQ(s.eta20 + s.eta02, fast);
  }
}

TEST(MomentOfInertia, EmptyMaskThrows) { EXPECT_THROW(moment_of_inertia(BinaryMask(4, 4)), EmptyMask); }

TEST(ExtractFeatures, EmptyMaskFlagged) {
  const auto layout = layout_for_crop(20, 20);
  const FrameFeatures f = extract_features(BinaryMask(20, 20), layout);
  EXPECT_TRUE(f.empty_mask);
  EXPECT_EQ(f.features, (FeatureVector{0.0, 0.0}));
  const FrameFeatures g = extract_features(BinaryMask(20, 20, true), layout);
  EXPECT_FALSE(g.empty_mask);
  EXPECT_GT(g.features.mi, 0.0);
}
