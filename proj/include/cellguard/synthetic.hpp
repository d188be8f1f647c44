#pragma once

// Synthetic driver frames with exact ground truth: a background, a skin
// colored face ellipse and, for positive frames, a skin blob inside one of
// the bottom hand regions of the expanded face crop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cellguard/error.hpp"
#include "cellguard/eval.hpp"
#include "cellguard/imaging.hpp"
#include "cellguard/roi.hpp"

namespace cellguard::synth {

struct SceneParams {
  int frame_w = 160;
  int frame_h = 120;
  Rect face{44, 20, 72, 84};
  Pixel skin{224, 172, 140};
  Pixel background{40, 70, 130};
  bool hand_blob = false;
  bool blob_left = true;
  double blob_fill = 0.6;  // fraction of the hand region covered by the blob
  int noise = 0;           // per-channel uniform perturbation in [-noise, noise]
  std::uint64_t seed = 1;
};

struct Scene {
  ImageBuffer frame;
  Rect face;
  Rect crop;        // expanded face region in frame coordinates
  SkinMask truth;   // exact skin pixels, crop coordinates
  int label = eval::kNoPhone;
};

namespace detail {

inline std::uint8_t jitter(std::uint8_t v, int noise, std::mt19937_64& rng) {
  if (noise <= 0) return v;
  const int d = static_cast<int>(rng() % static_cast<std::uint64_t>(2 * noise + 1)) - noise;
  return static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + d, 0, 255));
}

}  // namespace detail

inline Scene generate_scene(const SceneParams& p) {
  if (!p.face.inside(p.frame_w, p.frame_h)) throw InvalidInput("synthetic face box outside the frame");
  if (!(p.blob_fill > 0.0 && p.blob_fill <= 1.0)) throw InvalidInput("blob fill must lie in (0, 1]");

  Scene s;
  s.face = p.face;
  s.crop = expand_face(p.face, p.frame_w, p.frame_h);
  s.label = p.hand_blob ? eval::kWithPhone : eval::kNoPhone;

  BinaryMask skin(p.frame_w, p.frame_h);
  const double cx = p.face.x + p.face.w / 2.0;
  const double cy = p.face.y + p.face.h / 2.0;
  const double ax = 0.40 * p.face.w;
  const double ay = 0.45 * p.face.h;
  for (int y = 0; y < p.frame_h; ++y) {
    for (int x = 0; x < p.frame_w; ++x) {
      const double dx = (x + 0.5 - cx) / ax;
      const double dy = (y + 0.5 - cy) / ay;
      if (dx * dx + dy * dy <= 1.0) skin.set(x, y);
    }
  }
  if (p.hand_blob) {
    const RoiLayout layout = layout_for_crop(s.crop.w, s.crop.h);
    const Rect region = p.blob_left ? layout.hand_left : layout.hand_right;
    const int rows = std::min(region.h, static_cast<int>(std::ceil(p.blob_fill * region.h - 1e-9)));
    for (int y = region.bottom() - rows; y < region.bottom(); ++y) {
      for (int x = region.x; x < region.right(); ++x) skin.set(s.crop.x + x, s.crop.y + y);
    }
  }

  std::mt19937_64 rng(p.seed);
  s.frame = ImageBuffer(p.frame_w, p.frame_h);
  for (int y = 0; y < p.frame_h; ++y) {
    for (int x = 0; x < p.frame_w; ++x) {
      const Pixel base = skin.get(x, y) ? p.skin : p.background;
      s.frame.at(x, y) = Pixel{detail::jitter(base.c0, p.noise, rng), detail::jitter(base.c1, p.noise, rng),
                               detail::jitter(base.c2, p.noise, rng)};
    }
  }
  s.truth = crop(skin, s.crop);
  return s;
}

struct DatasetOptions {
  int positives = 100;
  int negatives = 100;
  int frame_w = 160;
  int frame_h = 120;
  int noise = 4;
  double fps = 15.0;  // timestamps are index / fps
  std::uint64_t seed = 7;
};

struct SyntheticFrame {
  SceneParams params;
  Scene scene;
  double timestamp = 0.0;
  std::optional<Rect> reported_face;  // empty when the face is "not found"
};

namespace detail {

inline SceneParams random_geometry(std::mt19937_64& rng, int frame_w, int frame_h, int noise) {
  auto uniform = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };
  SceneParams p;
  p.frame_w = frame_w;
  p.frame_h = frame_h;
  const int max_w = std::max(20, std::min(frame_w * 9 / 20, frame_h * 3 / 4));
  p.face.w = uniform(std::max(16, max_w * 2 / 3), max_w);
  p.face.h = std::min(frame_h - 2, p.face.w * 6 / 5);
  const int pad = percent_of(p.face.w, 20);
  p.face.x = uniform(pad, frame_w - p.face.w - pad);
  p.face.y = uniform(0, frame_h - p.face.h);
  p.skin = Pixel{static_cast<std::uint8_t>(uniform(205, 235)), static_cast<std::uint8_t>(uniform(155, 180)),
                 static_cast<std::uint8_t>(uniform(125, 145))};
  p.background = Pixel{static_cast<std::uint8_t>(uniform(25, 60)), static_cast<std::uint8_t>(uniform(55, 90)),
                       static_cast<std::uint8_t>(uniform(115, 150))};
  p.noise = noise;
  return p;
}

}  // namespace detail

// Balanced still-image set; positives and negatives are interleaved in a
// seeded random order.
inline std::vector<SyntheticFrame> make_dataset(const DatasetOptions& opt) {
  if (opt.positives < 0 || opt.negatives < 0) throw InvalidInput("negative class sizes");
  std::mt19937_64 rng(opt.seed);
  std::vector<int> labels(static_cast<std::size_t>(opt.positives), eval::kWithPhone);
  labels.insert(labels.end(), static_cast<std::size_t>(opt.negatives), eval::kNoPhone);
  eval::portable_shuffle(labels, rng);

  std::vector<SyntheticFrame> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SyntheticFrame f;
    f.params = detail::random_geometry(rng, opt.frame_w, opt.frame_h, opt.noise);
    f.params.hand_blob = labels[i] == eval::kWithPhone;
    f.params.blob_left = (rng() & 1u) != 0;
    f.params.blob_fill = 0.5 + 0.5 * static_cast<double>(rng() % 1001) / 1000.0;
    f.params.seed = rng();
    f.scene = generate_scene(f.params);
    f.timestamp = static_cast<double>(i) / opt.fps;
    f.reported_face = f.scene.face;
    out.push_back(std::move(f));
  }
  return out;
}

struct VideoOptions {
  double seconds = 60.0;
  double fps = 15.0;
  double min_segment = 3.0;  // seconds per with/without-phone segment
  double max_segment = 9.0;
  double missing_face_rate = 0.03;
  int frame_w = 160;
  int frame_h = 120;
  int noise = 4;
  std::uint64_t seed = 11;
};

// A single driver over time: alternating phone / no-phone segments with a
// fixed face geometry per segment and a few frames where the face is lost.
inline std::vector<SyntheticFrame> make_video(const VideoOptions& opt) {
  if (!(opt.fps > 0.0) || !(opt.seconds > 0.0)) throw InvalidInput("video needs positive duration and fps");
  std::mt19937_64 rng(opt.seed);
  const SceneParams base = detail::random_geometry(rng, opt.frame_w, opt.frame_h, opt.noise);
  const auto frames = static_cast<std::size_t>(std::floor(opt.seconds * opt.fps));

  std::vector<SyntheticFrame> out;
  out.reserve(frames);
  bool phone = (rng() & 1u) != 0;
  double segment_end = 0.0;
  bool blob_left = true;
  double blob_fill = 0.8;
  for (std::size_t i = 0; i < frames; ++i) {
    const double t = static_cast<double>(i) / opt.fps;
    if (t >= segment_end) {
      if (i > 0) phone = !phone;
      const double span = opt.max_segment - opt.min_segment;
      segment_end = t + opt.min_segment + span * static_cast<double>(rng() % 1001) / 1000.0;
      blob_left = (rng() & 1u) != 0;
      blob_fill = 0.5 + 0.5 * static_cast<double>(rng() % 1001) / 1000.0;
    }
    SyntheticFrame f;
    f.params = base;
    f.params.hand_blob = phone;
    f.params.blob_left = blob_left;
    f.params.blob_fill = blob_fill;
    f.params.seed = rng();
    f.scene = generate_scene(f.params);
    f.timestamp = t;
    const bool lost = static_cast<double>(rng() % 100000) / 100000.0 < opt.missing_face_rate;
    if (!lost) f.reported_face = f.scene.face;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace cellguard::synth
