#include <gtest/gtest.h>

#include "cellguard/cellguard.hpp"

using namespace cellguard;

TEST(ExpandFace, TwentyPercentEachSide) {
  EXPECT_EQ(expand_face({100, 50, 100, 120}, 640, 480), (Rect{80, 50, 140, 120}));
}

TEST(ExpandFace, ClampsAtEdges) {
  EXPECT_EQ(expand_face({0, 10, 100, 100}, 640, 480), (Rect{0, 10, 120, 100}));
  EXPECT_EQ(expand_face({560, 10, 80, 100}, 640, 480), (Rect{544, 10, 96, 100}));
  EXPECT_EQ(expand_face({0, 0, 640, 480}, 640, 480), (Rect{0, 0, 640, 480}));
}

TEST(ExpandFace, PreservesVerticalExtentAndRatio) {
  for (int w = 10; w <= 200; w += 5) {
    const Rect r = expand_face({250, 40, w, 90}, 800, 600);
    EXPECT_EQ(r.y, 40);
    EXPECT_EQ(r.h, 90);
    EXPECT_EQ(r.w, w + 2 * percent_of(w, 20));
    if (w % 5 == 0) {
      EXPECT_EQ(r.w * 5, w * 7);  // exactly 1.4x when 20% is integral
    }
  }
}

TEST(ExpandFace, RejectsBadBoxes) {
  EXPECT_THROW(expand_face({0, 0, 0, 10}, 100, 100), InvalidInput);
  EXPECT_THROW(expand_face({90, 0, 20, 10}, 100, 100), InvalidInput);
}

TEST(Layout, HundredSquare) {
  const RoiLayout l = layout_for_crop(100, 100);
  EXPECT_EQ(l.skin_sample, (Rect{30, 50, 40, 10}));
  EXPECT_EQ(l.hand_left, (Rect{0, 75, 25, 25}));
  EXPECT_EQ(l.hand_right, (Rect{75, 75, 25, 25}));
}

TEST(Layout, WideCrop) {
  const RoiLayout l = layout_for_crop(200, 100);
  EXPECT_EQ(l.skin_sample, (Rect{60, 50, 80, 10}));
}

TEST(Layout, EveryRectInsideForAllSmallSizes) {
  for (int w = 8; w <= 64; ++w) {
    for (int h = 8; h <= 64; ++h) {
      const RoiLayout l = layout_for_crop(w, h);
      for (const Rect& r : {l.skin_sample, l.hand_left, l.hand_right}) {
        EXPECT_TRUE(r.inside(w, h)) << w << "x" << h;
      }
      EXPECT_FALSE(l.hand_left.intersects(l.hand_right)) << w << "x" << h;
    }
  }
  EXPECT_THROW(layout_for_crop(7, 20), InvalidInput);
}

TEST(Crop, IdentityAndComposition) {
  ImageBuffer img(5, 4);
  int k = 0;
  for (auto& p : img.pixels()) p.c0 = static_cast<std::uint8_t>(k++);
  EXPECT_EQ(crop(img, {0, 0, 5, 4}), img);
  EXPECT_EQ(crop(img, {0, 0, 1, 1}).at(0, 0), img.at(0, 0));
  const ImageBuffer once = crop(img, {1, 1, 3, 2});
  EXPECT_EQ(crop(once, {0, 0, 3, 2}), once);
  EXPECT_EQ(once.at(2, 1), img.at(3, 2));
  EXPECT_THROW(crop(img, {3, 0, 3, 1}), InvalidInput);
}

TEST(LargestBox, PicksMaxAreaFirstOnTie) {
  const std::vector<Rect> boxes{{0, 0, 10, 10}, {5, 5, 20, 5}, {1, 1, 10, 10}, {9, 9, 4, 4}};
  EXPECT_EQ(largest_box(boxes), (Rect{0, 0, 10, 10}));
  EXPECT_THROW(largest_box(std::vector<Rect>{}), InvalidInput);
}
