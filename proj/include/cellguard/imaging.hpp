#pragma once

// Pixel containers, color-space conversion, 32-level quantization and the
// netpbm readers/writers (binary PPM for frames, binary PBM for masks).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cellguard/error.hpp"

namespace cellguard {

struct Pixel {
  std::uint8_t c0 = 0;
  std::uint8_t c1 = 0;
  std::uint8_t c2 = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Row-major raster of three 8-bit channels. The channel meaning (RGB, HSV,
// YCrCb) is carried by the producing function, not by the type.
class ImageBuffer {
 public:
  ImageBuffer() = default;

  ImageBuffer(int width, int height, Pixel fill = {}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InvalidInput("image dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  Pixel& at(int x, int y) { return pixels_[index(x, y)]; }
  const Pixel& at(int x, int y) const { return pixels_[index(x, y)]; }

  const std::vector<Pixel>& pixels() const noexcept { return pixels_; }
  std::vector<Pixel>& pixels() noexcept { return pixels_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> pixels_;
};

// Each channel reduced to floor(v / 32), i.e. 8 levels and 512 colors.
class QuantizedImage {
 public:
  static constexpr int kLevels = 8;
  static constexpr int kBins = kLevels * kLevels * kLevels;

  QuantizedImage(int width, int height)
      : width_(width), height_(height),
        cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  Pixel& at(int x, int y) { return cells_[static_cast<std::size_t>(y) * width_ + x]; }
  const Pixel& at(int x, int y) const { return cells_[static_cast<std::size_t>(y) * width_ + x]; }

  // Flat 0..511 bin of the cell at (x, y).
  int bin(int x, int y) const {
    const Pixel& p = at(x, y);
    return (p.c0 * kLevels + p.c1) * kLevels + p.c2;
  }

  const std::vector<Pixel>& cells() const noexcept { return cells_; }

 private:
  int width_;
  int height_;
  std::vector<Pixel> cells_;
};

// Binary raster; also the skin mask type.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0) {
    if (width < 1 || height < 1) {
      throw InvalidInput("mask dimensions must be positive");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool get(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
  std::vector<std::uint8_t>& bits() noexcept { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

using SkinMask = BinaryMask;

namespace detail {

// Round half away from zero, then clamp into a byte.
inline std::uint8_t to_byte(double v) {
  const double r = std::round(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace detail

// H in [0,360) degrees is mapped linearly onto [0,255]; S and V are 0..255.
inline Pixel rgb_to_hsv(Pixel rgb) {
  const int r = rgb.c0, g = rgb.c1, b = rgb.c2;
  const int max = std::max({r, g, b});
  const int min = std::min({r, g, b});
  const int delta = max - min;

  double hue = 0.0;
  if (delta != 0) {
    if (max == r) {
      hue = 60.0 * static_cast<double>(g - b) / delta;
    } else if (max == g) {
      hue = 60.0 * static_cast<double>(b - r) / delta + 120.0;
    } else {
      hue = 60.0 * static_cast<double>(r - g) / delta + 240.0;
    }
    if (hue < 0.0) hue += 360.0;
  }
  const double sat = max == 0 ? 0.0 : 255.0 * delta / max;
  return Pixel{detail::to_byte(hue * 255.0 / 360.0), detail::to_byte(sat), static_cast<std::uint8_t>(max)};
}

// Full-range BT.601 (JFIF) with chroma offset 128. Output order is Y, Cr, Cb.
inline Pixel rgb_to_ycrcb(Pixel rgb) {
  const double r = rgb.c0, g = rgb.c1, b = rgb.c2;
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  const double cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
  const double cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
  return Pixel{detail::to_byte(y), detail::to_byte(cr), detail::to_byte(cb)};
}

inline ImageBuffer rgb_to_hsv(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (auto& p : out.pixels()) p = rgb_to_hsv(p);
  return out;
}

inline ImageBuffer rgb_to_ycrcb(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (auto& p : out.pixels()) p = rgb_to_ycrcb(p);
  return out;
}

constexpr std::uint8_t quantize_level(std::uint8_t v) noexcept { return static_cast<std::uint8_t>(v / 32); }

inline QuantizedImage quantize(const ImageBuffer& img) {
  QuantizedImage q(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Pixel& p = img.at(x, y);
      q.at(x, y) = Pixel{quantize_level(p.c0), quantize_level(p.c1), quantize_level(p.c2)};
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// netpbm I/O

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_pnm_int(std::istream& in) {
  skip_pnm_space(in);
  int v = -1;
  if (!(in >> v) || v < 0) {
    throw IoError("malformed netpbm header");
  }
  return v;
}

}  // namespace detail

inline ImageBuffer read_ppm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') {
    throw IoError("not a binary PPM (P6) stream");
  }
  const int width = detail::read_pnm_int(in);
  const int height = detail::read_pnm_int(in);
  const int maxval = detail::read_pnm_int(in);
  if (width < 1 || height < 1) throw IoError("PPM has empty dimensions");
  if (maxval != 255) throw IoError("only 8-bit PPM (maxval 255) is supported");
  in.get();  // single whitespace before the raster

  ImageBuffer img(width, height);
  std::vector<char> row(static_cast<std::size_t>(width) * 3);
  for (int y = 0; y < height; ++y) {
    in.read(row.data(), static_cast<std::streamsize>(row.size()));
    if (!in) throw IoError("truncated PPM raster");
    for (int x = 0; x < width; ++x) {
      img.at(x, y) = Pixel{static_cast<std::uint8_t>(row[3 * x]), static_cast<std::uint8_t>(row[3 * x + 1]),
                           static_cast<std::uint8_t>(row[3 * x + 2])};
    }
  }
  return img;
}

inline ImageBuffer read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_ppm(in);
}

inline void write_ppm(std::ostream& out, const ImageBuffer& img) {
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (const Pixel& p : img.pixels()) {
    const char rgb[3] = {static_cast<char>(p.c0), static_cast<char>(p.c1), static_cast<char>(p.c2)};
    out.write(rgb, 3);
  }
}

inline void write_ppm(const std::string& path, const ImageBuffer& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_ppm(out, img);
}

// P4: 1 = black = foreground, rows padded to whole bytes, MSB first.
inline void write_pbm(std::ostream& out, const BinaryMask& mask) {
  out << "P4\n" << mask.width() << ' ' << mask.height() << '\n';
  const int row_bytes = (mask.width() + 7) / 8;
  std::vector<char> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < mask.height(); ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) row[x / 8] = static_cast<char>(row[x / 8] | (0x80 >> (x % 8)));
    }
    out.write(row.data(), row_bytes);
  }
}

inline void write_pbm(const std::string& path, const BinaryMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_pbm(out, mask);
}

inline BinaryMask read_pbm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '4') {
    throw IoError("not a binary PBM (P4) stream");
  }
  const int width = detail::read_pnm_int(in);
  const int height = detail::read_pnm_int(in);
  if (width < 1 || height < 1) throw IoError("PBM has empty dimensions");
  in.get();
  BinaryMask mask(width, height);
  const int row_bytes = (width + 7) / 8;
  std::vector<char> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < height; ++y) {
    in.read(row.data(), row_bytes);
    if (!in) throw IoError("truncated PBM raster");
    for (int x = 0; x < width; ++x) {
      mask.set(x, y, (static_cast<unsigned char>(row[x / 8]) & (0x80 >> (x % 8))) != 0);
    }
  }
  return mask;
}

}  // namespace cellguard
