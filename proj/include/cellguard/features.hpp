#pragma once

// Per-frame features: the hand-region skin percentage (PH) and the first
// Hu invariant of the whole skin mask (MI).

#include <cmath>
#include <cstdint>

#include "cellguard/error.hpp"
#include "cellguard/imaging.hpp"
#include "cellguard/roi.hpp"

namespace cellguard {

struct FeatureVector {
  double ph = 0.0;
  double mi = 0.0;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct MomentSet {
  double m00 = 0, m10 = 0, m01 = 0, m20 = 0, m02 = 0;
  double xc = 0, yc = 0;
  double mu00 = 0, mu20 = 0, mu02 = 0;
  double eta20 = 0, eta02 = 0;
};

namespace detail {

inline long long count_in(const SkinMask& mask, const Rect& r) {
  long long n = 0;
  for (int y = r.y; y < r.bottom(); ++y) {
    for (int x = r.x; x < r.right(); ++x) n += mask.get(x, y) ? 1 : 0;
  }
  return n;
}

inline double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

inline void check_order(int p, int q) {
  if (p < 0 || p > 2 || q < 0 || q > 2) throw InvalidInput("moment order must be in {0,1,2}");
}

// Exact integer accumulation of the order <= 2 raw sums (1-based coordinates).
struct IntegerSums {
  __int128 n = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
};

inline IntegerSums integer_sums(const SkinMask& mask) {
  IntegerSums s;
  for (int y = 0; y < mask.height(); ++y) {
    long long row_n = 0, row_sx = 0, row_sxx = 0;
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(x, y)) continue;
      const long long xv = x + 1;
      ++row_n;
      row_sx += xv;
      row_sxx += xv * xv;
    }
    const long long yv = y + 1;
    s.n += row_n;
    s.sx += row_sx;
    s.sxx += row_sxx;
    s.sy += static_cast<__int128>(row_n) * yv;
    s.syy += static_cast<__int128>(row_n) * yv * yv;
  }
  return s;
}

}  // namespace detail

// PH = (R1 + R2) / T with T the crop's pixel count.
inline double percentage_hand(const SkinMask& mask, const RoiLayout& layout) {
  if (mask.width() != layout.crop_w || mask.height() != layout.crop_h) {
    throw InvalidInput("mask does not match its layout");
  }
  const long long skin = detail::count_in(mask, layout.hand_left) + detail::count_in(mask, layout.hand_right);
  return static_cast<double>(skin) / (static_cast<double>(mask.width()) * mask.height());
}

// m_pq = sum x^p y^q f(x,y) with x, y starting at 1.
inline double raw_moment(const SkinMask& mask, int p, int q) {
  detail::check_order(p, q);
  double sum = 0.0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) sum += detail::ipow(x + 1.0, p) * detail::ipow(y + 1.0, q);
    }
  }
  return sum;
}

inline double central_moment(const SkinMask& mask, int p, int q) {
  detail::check_order(p, q);
  const double m00 = raw_moment(mask, 0, 0);
  if (m00 == 0.0) throw EmptyMask();
  const double xc = raw_moment(mask, 1, 0) / m00;
  const double yc = raw_moment(mask, 0, 1) / m00;
  double sum = 0.0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) sum += detail::ipow(x + 1.0 - xc, p) * detail::ipow(y + 1.0 - yc, q);
    }
  }
  return sum;
}

// All moments feeding MI, from one exact integer pass. Central second moments
// use mu20 = (m00*m20 - m10^2) / m00, which is exact before the final division
// and therefore bit-identical under integer translation.
inline MomentSet compute_moments(const SkinMask& mask) {
  const auto s = detail::integer_sums(mask);
  if (s.n == 0) throw EmptyMask();
  MomentSet m;
  m.m00 = static_cast<double>(s.n);
  m.m10 = static_cast<double>(s.sx);
  m.m01 = static_cast<double>(s.sy);
  m.m20 = static_cast<double>(s.sxx);
  m.m02 = static_cast<double>(s.syy);
  m.xc = m.m10 / m.m00;
  m.yc = m.m01 / m.m00;
  m.mu00 = m.m00;
  const __int128 spread_x = s.n * s.sxx - s.sx * s.sx;
  const __int128 spread_y = s.n * s.syy - s.sy * s.sy;
  m.mu20 = static_cast<double>(spread_x) / m.m00;
  m.mu02 = static_cast<double>(spread_y) / m.m00;
  // eta_pq = mu_pq / mu00^(1 + (p+q)/2); for p+q = 2 the exponent is 2.
  const double area_cubed = m.m00 * m.m00 * m.m00;
  m.eta20 = static_cast<double>(spread_x) / area_cubed;
  m.eta02 = static_cast<double>(spread_y) / area_cubed;
  return m;
}

inline double moment_of_inertia(const SkinMask& mask) {
  const auto s = detail::integer_sums(mask);
  if (s.n == 0) throw EmptyMask();
  const __int128 spread = (s.n * s.sxx - s.sx * s.sx) + (s.n * s.syy - s.sy * s.sy);
  const double area = static_cast<double>(s.n);
  return static_cast<double>(spread) / (area * area * area);
}

struct FrameFeatures {
  FeatureVector features;
  bool empty_mask = false;
};

// Empty masks yield (0, 0) with the flag set instead of throwing.
inline FrameFeatures extract_features(const SkinMask& mask, const RoiLayout& layout) {
  FrameFeatures out;
  out.features.ph = percentage_hand(mask, layout);
  if (mask.count() == 0) {
    out.empty_mask = true;
    out.features = {0.0, 0.0};
    return out;
  }
  out.features.mi = moment_of_inertia(mask);
  return out;
}

}  // namespace cellguard
