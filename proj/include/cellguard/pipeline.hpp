#pragma once

// Frame-level pipeline and manifest ingestion: face box -> expanded crop ->
// skin mask -> (PH, MI).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cellguard/error.hpp"
#include "cellguard/eval.hpp"
#include "cellguard/features.hpp"
#include "cellguard/imaging.hpp"
#include "cellguard/roi.hpp"
#include "cellguard/segmentation.hpp"
#include "cellguard/text.hpp"

namespace cellguard {

struct ManifestEntry {
  std::string path;
  std::optional<Rect> face;   // empty = "none"
  std::optional<int> label;   // empty = "?"
  std::optional<double> timestamp;
};

inline constexpr std::string_view kManifestHeader = "path,face_x,face_y,face_w,face_h,label,timestamp";

inline std::string frame_id_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

// Relative frame paths are resolved against `base_dir`.
inline std::vector<ManifestEntry> read_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kManifestHeader) {
    throw InvalidInput("manifest must start with the header '" + std::string(kManifestHeader) + "'");
  }
  std::vector<ManifestEntry> entries;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    const std::string where = "manifest line " + std::to_string(lineno);
    if (f.size() != 7) throw InvalidInput(where + ": expected 7 fields");
    ManifestEntry e;
    std::filesystem::path p(f[0]);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    e.path = p.string();

    const bool any_none = f[1] == "none" || f[2] == "none" || f[3] == "none" || f[4] == "none";
    if (!any_none) {
      try {
        e.face = Rect{static_cast<int>(text::parse_int(f[1])), static_cast<int>(text::parse_int(f[2])),
                      static_cast<int>(text::parse_int(f[3])), static_cast<int>(text::parse_int(f[4]))};
      } catch (const InvalidInput& err) {
        throw InvalidInput(where + ": " + err.what());
      }
    }
    if (f[5] == "+1" || f[5] == "1") {
      e.label = eval::kWithPhone;
    } else if (f[5] == "-1") {
      e.label = eval::kNoPhone;
    } else if (f[5] != "?" && !f[5].empty()) {
      throw InvalidInput(where + ": label must be +1, -1 or ?");
    }
    if (!f[6].empty()) e.timestamp = text::parse_double(f[6]);
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<ManifestEntry> read_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  return read_manifest(in, std::filesystem::path(path).parent_path());
}

inline void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  out << kManifestHeader << '\n';
  for (const auto& e : entries) {
    out << e.path << ',';
    if (e.face) {
      out << e.face->x << ',' << e.face->y << ',' << e.face->w << ',' << e.face->h << ',';
    } else {
      out << "none,none,none,none,";
    }
    out << (e.label ? (*e.label > 0 ? "+1" : "-1") : "?") << ',';
    if (e.timestamp) out << text::format_double(*e.timestamp);
    out << '\n';
  }
}

// Runs `command "<image path>"` and reads one "x y w h" box per output
// line (commas also accepted). The largest box is the driver's face.
inline std::optional<Rect> detect_face(const std::string& command, const std::string& image_path) {
  const std::string cmd = command + " \"" + image_path + "\"";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) throw IoError("cannot run detector: " + command);
  std::vector<Rect> boxes;
  char buf[256];
  while (std::fgets(buf, sizeof(buf), pipe.get()) != nullptr) {
    std::string line(buf);
    for (char& c : line) {
      if (c == ',' || c == '\t') c = ' ';
    }
    std::vector<int> v;
    for (const auto& tok : text::split(text::trim(line), ' ')) {
      if (!tok.empty()) v.push_back(static_cast<int>(text::parse_int(tok)));
    }
    if (v.empty()) continue;
    if (v.size() != 4) throw InvalidInput("detector output lines must hold x y w h");
    boxes.push_back(Rect{v[0], v[1], v[2], v[3]});
  }
  if (boxes.empty()) return std::nullopt;
  return largest_box(boxes);
}

enum class FrameStatus { Ok, NotFound, Error };

inline std::string_view to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::Ok: return "ok";
    case FrameStatus::NotFound: return "not_found";
    case FrameStatus::Error: return "error";
  }
  return "?";
}

struct FrameOutcome {
  FrameStatus status = FrameStatus::Ok;
  FeatureVector features;
  bool empty_mask = false;
  std::string error;
};

inline FrameOutcome process_frame(const ImageBuffer& frame, const std::optional<Rect>& face,
                                  double seg_fraction = kDefaultSkinFraction) {
  FrameOutcome out;
  if (!face) {
    out.status = FrameStatus::NotFound;
    return out;
  }
  try {
    const Rect region = expand_face(*face, frame.width(), frame.height());
    const RoiLayout layout = layout_for_crop(region.w, region.h);
    const SkinMask mask = segment_skin(crop(frame, region), layout, seg_fraction);
    const FrameFeatures f = extract_features(mask, layout);
    out.features = f.features;
    out.empty_mask = f.empty_mask;
  } catch (const Error& e) {
    out.status = FrameStatus::Error;
    out.error = e.what();
  }
  return out;
}

struct FrameRecord {
  std::string frame_id;
  std::string path;
  FrameStatus status = FrameStatus::Ok;
  FeatureVector features;
  bool empty_mask = false;
  std::optional<int> label;
  double timestamp = 0.0;
  std::string error;
};

struct IngestOptions {
  double seg_fraction = kDefaultSkinFraction;
  double fps = 15.0;             // timestamp = index / fps when the manifest omits one
  std::string detector_command;  // overrides manifest boxes when set
};

inline double entry_timestamp(const ManifestEntry& e, std::size_t index, double fps) {
  return e.timestamp ? *e.timestamp : static_cast<double>(index) / fps;
}

inline FrameRecord process_entry(const ManifestEntry& e, std::size_t index, const IngestOptions& opt) {
  FrameRecord r;
  r.frame_id = frame_id_of(e.path);
  r.path = e.path;
  r.label = e.label;
  r.timestamp = entry_timestamp(e, index, opt.fps);
  try {
    const ImageBuffer frame = read_ppm(e.path);
    const std::optional<Rect> face = opt.detector_command.empty() ? e.face : detect_face(opt.detector_command, e.path);
    const FrameOutcome o = process_frame(frame, face, opt.seg_fraction);
    r.status = o.status;
    r.features = o.features;
    r.empty_mask = o.empty_mask;
    r.error = o.error;
  } catch (const Error& err) {
    r.status = FrameStatus::Error;
    r.error = err.what();
  }
  return r;
}

struct IngestResult {
  std::vector<FrameRecord> records;
  eval::LabeledDataset dataset;  // labeled frames with status ok
  std::size_t not_found = 0;
  std::size_t errors = 0;
  std::size_t empty_masks = 0;
};

inline IngestResult ingest(const std::vector<ManifestEntry>& entries, const IngestOptions& opt = {}) {
  IngestResult result;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    FrameRecord r = process_entry(entries[i], i, opt);
    if (r.status == FrameStatus::NotFound) ++result.not_found;
    if (r.status == FrameStatus::Error) ++result.errors;
    if (r.status == FrameStatus::Ok) {
      result.empty_masks += r.empty_mask ? 1 : 0;
      if (r.label) result.dataset.items.push_back({r.features, *r.label, r.frame_id, r.timestamp});
    }
    result.records.push_back(std::move(r));
  }
  const bool any_usable = std::any_of(result.records.begin(), result.records.end(),
                                      [](const FrameRecord& r) { return r.status == FrameStatus::Ok; });
  if (!any_usable) throw InvalidInput("no usable frames in manifest");
  return result;
}

// frame_id,timestamp,ph,mi,label for every usable frame.
inline void write_features_csv(std::ostream& out, const std::vector<FrameRecord>& records) {
  using text::format_double;
  out << "frame_id,timestamp,ph,mi,label\n";
  for (const auto& r : records) {
    if (r.status != FrameStatus::Ok) continue;
    out << r.frame_id << ',' << format_double(r.timestamp) << ',' << format_double(r.features.ph) << ','
        << format_double(r.features.mi) << ',' << (r.label ? (*r.label > 0 ? "+1" : "-1") : "?") << '\n';
  }
}

}  // namespace cellguard
