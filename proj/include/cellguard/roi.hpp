#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>

#include "cellguard/error.hpp"
#include "cellguard/imaging.hpp"

namespace cellguard {

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const noexcept { return x + w; }
  int bottom() const noexcept { return y + h; }
  long long area() const noexcept { return static_cast<long long>(w) * h; }

  bool contains(int px, int py) const noexcept { return px >= x && px < right() && py >= y && py < bottom(); }
  bool inside(int width, int height) const noexcept {
    return w >= 1 && h >= 1 && x >= 0 && y >= 0 && right() <= width && bottom() <= height;
  }
  bool intersects(const Rect& o) const noexcept {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Sub-rectangles of an expanded face crop, all in crop coordinates.
struct RoiLayout {
  int crop_w = 0;
  int crop_h = 0;
  Rect skin_sample;
  Rect hand_left;   // bottom-left hand/arm region
  Rect hand_right;  // bottom-right hand/arm region

  friend bool operator==(const RoiLayout&, const RoiLayout&) = default;
};

// round_half_up(dim * percent / 100) in exact integer arithmetic.
constexpr int percent_of(int dim, int percent) noexcept {
  return static_cast<int>((2LL * dim * percent + 100) / 200);
}

// Widens a face box by 20% of its width on each side, clamped to the frame.
inline Rect expand_face(const Rect& face, int frame_w, int frame_h) {
  if (face.w <= 0 || face.h <= 0) {
    throw InvalidInput("degenerate face box");
  }
  if (!face.inside(frame_w, frame_h)) {
    throw InvalidInput("face box lies outside the frame");
  }
  const int pad = percent_of(face.w, 20);
  const int left = std::max(0, face.x - pad);
  const int right = std::min(frame_w, face.right() + pad);
  return Rect{left, face.y, right - left, face.h};
}

namespace detail {

inline Rect clamp_into(Rect r, int w, int h) {
  r.w = std::clamp(r.w, 1, w);
  r.h = std::clamp(r.h, 1, h);
  r.x = std::clamp(r.x, 0, w - r.w);
  r.y = std::clamp(r.y, 0, h - r.h);
  return r;
}

}  // namespace detail

inline RoiLayout layout_for_crop(int crop_w, int crop_h) {
  if (crop_w < 8 || crop_h < 8) {
    throw InvalidInput("crop must be at least 8x8 pixels");
  }
  RoiLayout layout;
  layout.crop_w = crop_w;
  layout.crop_h = crop_h;

  // 40% x 10%, horizontally centred, top edge on the vertical centre.
  const int sample_w = percent_of(crop_w, 40);
  const int sample_h = percent_of(crop_h, 10);
  layout.skin_sample = detail::clamp_into(
      Rect{(crop_w - sample_w + 1) / 2, percent_of(crop_h, 50), sample_w, sample_h}, crop_w, crop_h);

  const int hand_w = percent_of(crop_w, 25);
  const int hand_h = percent_of(crop_h, 25);
  layout.hand_left = detail::clamp_into(Rect{0, crop_h - hand_h, hand_w, hand_h}, crop_w, crop_h);
  layout.hand_right = detail::clamp_into(Rect{crop_w - hand_w, crop_h - hand_h, hand_w, hand_h}, crop_w, crop_h);
  return layout;
}

inline ImageBuffer crop(const ImageBuffer& img, const Rect& r) {
  if (!r.inside(img.width(), img.height())) {
    throw InvalidInput("crop rectangle out of bounds");
  }
  ImageBuffer out(r.w, r.h);
  for (int y = 0; y < r.h; ++y) {
    for (int x = 0; x < r.w; ++x) {
      out.at(x, y) = img.at(r.x + x, r.y + y);
    }
  }
  return out;
}

inline BinaryMask crop(const BinaryMask& mask, const Rect& r) {
  if (!r.inside(mask.width(), mask.height())) {
    throw InvalidInput("crop rectangle out of bounds");
  }
  BinaryMask out(r.w, r.h);
  for (int y = 0; y < r.h; ++y) {
    for (int x = 0; x < r.w; ++x) {
      out.set(x, y, mask.get(r.x + x, r.y + y));
    }
  }
  return out;
}

// Largest-area box wins; ties keep the earliest. Empty input is an error.
inline Rect largest_box(std::span<const Rect> boxes) {
  if (boxes.empty()) throw InvalidInput("no face boxes");
  return *std::max_element(boxes.begin(), boxes.end(),
                           [](const Rect& a, const Rect& b) { return a.area() < b.area(); });
}

}  // namespace cellguard
