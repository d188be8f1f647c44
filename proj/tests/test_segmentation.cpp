#include <gtest/gtest.h>

#include <random>

#include "cellguard/cellguard.hpp"
#include "oracles.hpp"

using namespace cellguard;

namespace {

QuantizedImage uniform_quantized(int w, int h, Pixel cell) {
  QuantizedImage q(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) q.at(x, y) = cell;
  }
  return q;
}

}  // namespace

TEST(Histogram, UniformSample) {
  const auto q = uniform_quantized(30, 30, Pixel{2, 3, 6});
  const auto hist = build_histogram(q, {5, 5, 20, 20});
  EXPECT_EQ(hist.total, 400u);
  EXPECT_EQ(hist.at(2, 3, 6), 400u);
  std::uint64_t sum = 0;
  for (auto c : hist.counts) sum += c;
  EXPECT_EQ(sum, 400u);
}

TEST(Histogram, TwoColorSplit) {
  auto q = uniform_quantized(20, 20, Pixel{1, 1, 1});
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 20; ++x) q.at(x, y) = Pixel{7, 0, 3};
  }
  const auto hist = build_histogram(q, {0, 0, 20, 20});
  EXPECT_EQ(hist.at(1, 1, 1), 300u);
  EXPECT_EQ(hist.at(7, 0, 3), 100u);
  EXPECT_EQ(hist.total, 400u);
}

TEST(Threshold, InclusiveFivePercent) {
  // 20-pixel sample: one pixel of color A is exactly 5%.
  auto q = uniform_quantized(20, 2, Pixel{0, 0, 0});
  q.at(0, 0) = Pixel{4, 4, 4};
  q.at(5, 1) = Pixel{6, 6, 6};  // outside the sample: never seen
  const auto hist = build_histogram(q, {0, 0, 20, 1});
  const SkinMask m = threshold_mask(q, hist, 0.05);
  EXPECT_TRUE(m.get(0, 0));
  EXPECT_TRUE(m.get(3, 1));
  EXPECT_FALSE(m.get(5, 1));
}

TEST(Threshold, UniformImageAllTrue) {
  const auto q = uniform_quantized(9, 9, Pixel{3, 3, 3});
  EXPECT_EQ(threshold_mask(q, build_histogram(q, {2, 2, 3, 3})).count(), 81u);
}

TEST(Combine, AlgebraicLaws) {
  BinaryMask t(4, 4, true), f(4, 4, false), a(4, 4), b(4, 4);
  a.set(1, 1);
  a.set(2, 3);
  b.set(2, 3);
  b.set(0, 0);
  EXPECT_EQ(combine(t, t), t);
  EXPECT_EQ(combine(a, f), f);
  EXPECT_EQ(combine(a, b), combine(b, a));
  EXPECT_EQ(combine(a, b).count(), 1u);
  EXPECT_THROW(combine(a, BinaryMask(3, 4)), InvalidInput);
}

TEST(Segment, UniformCropAllTrue) {
  const ImageBuffer crop_img(40, 30, Pixel{200, 150, 120});
  const auto layout = layout_for_crop(40, 30);
  EXPECT_EQ(segment_skin(crop_img, layout).count(), 1200u);
}

TEST(Segment, TwoFarColors) {
  const auto layout = layout_for_crop(50, 40);
  ImageBuffer img(50, 40, Pixel{20, 40, 200});
  const Rect s = layout.skin_sample;
  for (int y = s.y; y < s.bottom(); ++y) {
    for (int x = s.x; x < s.right(); ++x) img.at(x, y) = Pixel{230, 180, 150};
  }
  img.at(1, 1) = Pixel{230, 180, 150};
  const SkinMask m = segment_skin(img, layout);
  EXPECT_EQ(m.count(), static_cast<std::size_t>(s.area()) + 1);
  EXPECT_TRUE(m.get(1, 1));
  EXPECT_FALSE(m.get(0, 0));
}

TEST(Segment, SyntheticEllipseMatchesTruth) {
  synth::SceneParams p;
  p.background = Pixel{0, 0, 0};
  const synth::Scene scene = synth::generate_scene(p);
  const ImageBuffer c = crop(scene.frame, scene.crop);
  const SkinMask m = segment_skin(c, layout_for_crop(c.width(), c.height()));
  EXPECT_EQ(m, scene.truth);
}

TEST(Segment, UniformSampleAlwaysTrueInOwnMask) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    ImageBuffer img = oracle::random_crop(rng, 24, 24);
    const auto layout = layout_for_crop(24, 24);
    const Pixel color{static_cast<std::uint8_t>(rng() % 256), static_cast<std::uint8_t>(rng() % 256),
                      static_cast<std::uint8_t>(rng() % 256)};
    const Rect s = layout.skin_sample;
    for (int y = s.y; y < s.bottom(); ++y) {
      for (int x = s.x; x < s.right(); ++x) img.at(x, y) = color;
    }
    const SkinMask m = segment_skin(img, layout);
    for (int y = s.y; y < s.bottom(); ++y) {
      for (int x = s.x; x < s.right(); ++x) EXPECT_TRUE(m.get(x, y));
    }
  }
}

TEST(Segment, MatchesNaivePerPixelRecount) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 30; ++t) {
    const ImageBuffer img = oracle::random_crop(rng, 16, 16);
    const auto layout = layout_for_crop(16, 16);
    for (double frac : {0.05, 0.2}) {
      EXPECT_EQ(segment_skin(img, layout, frac), oracle::naive_segment(img, layout.skin_sample, frac));
    }
  }
}

TEST(Segment, RejectsMismatchedLayout) {
  EXPECT_THROW(segment_skin(ImageBuffer(20, 20), layout_for_crop(21, 20)), InvalidInput);
}
