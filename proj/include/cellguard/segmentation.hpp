#pragma once

#include <array>
#include <cstdint>

#include "cellguard/error.hpp"
#include "cellguard/imaging.hpp"
#include "cellguard/roi.hpp"

namespace cellguard {

inline constexpr double kDefaultSkinFraction = 0.05;

// 8x8x8 color counts over the quantized skin sample.
struct ColorHistogram3D {
  std::array<std::uint32_t, QuantizedImage::kBins> counts{};
  std::uint64_t total = 0;

  std::uint32_t at(int c0, int c1, int c2) const {
    return counts[static_cast<std::size_t>((c0 * QuantizedImage::kLevels + c1) * QuantizedImage::kLevels + c2)];
  }
};

inline ColorHistogram3D build_histogram(const QuantizedImage& q, const Rect& sample) {
  if (sample.w < 1 || sample.h < 1) {
    throw InvalidInput("empty skin sample");
  }
  if (!sample.inside(q.width(), q.height())) {
    throw InvalidInput("skin sample outside the image");
  }
  ColorHistogram3D hist;
  for (int y = sample.y; y < sample.bottom(); ++y) {
    for (int x = sample.x; x < sample.right(); ++x) {
      ++hist.counts[static_cast<std::size_t>(q.bin(x, y))];
    }
  }
  hist.total = static_cast<std::uint64_t>(sample.area());
  return hist;
}

// A pixel is skin when its bin holds at least `fraction` of the sample.
inline SkinMask threshold_mask(const QuantizedImage& q, const ColorHistogram3D& hist,
                               double fraction = kDefaultSkinFraction) {
  if (hist.total == 0) {
    throw InvalidInput("histogram is empty");
  }
  const double cut = fraction * static_cast<double>(hist.total);
  std::array<bool, QuantizedImage::kBins> accept{};
  for (std::size_t i = 0; i < accept.size(); ++i) {
    accept[i] = static_cast<double>(hist.counts[i]) >= cut;
  }
  SkinMask mask(q.width(), q.height());
  for (int y = 0; y < q.height(); ++y) {
    for (int x = 0; x < q.width(); ++x) {
      mask.set(x, y, accept[static_cast<std::size_t>(q.bin(x, y))]);
    }
  }
  return mask;
}

inline SkinMask combine(const SkinMask& a, const SkinMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidInput("mask dimensions differ");
  }
  SkinMask out = a;
  auto& bits = out.bits();
  const auto& other = b.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] &= other[i];
  return out;
}

inline SkinMask segment_skin(const ImageBuffer& crop_img, const RoiLayout& layout,
                             double fraction = kDefaultSkinFraction) {
  if (crop_img.width() != layout.crop_w || crop_img.height() != layout.crop_h) {
    throw InvalidInput("crop does not match its layout");
  }
  const QuantizedImage hsv = quantize(rgb_to_hsv(crop_img));
  const QuantizedImage ycrcb = quantize(rgb_to_ycrcb(crop_img));
  const SkinMask hsv_mask = threshold_mask(hsv, build_histogram(hsv, layout.skin_sample), fraction);
  const SkinMask ycrcb_mask = threshold_mask(ycrcb, build_histogram(ycrcb, layout.skin_sample), fraction);
  return combine(hsv_mask, ycrcb_mask);
}

}  // namespace cellguard
