#pragma once

#include <string>
#include <vector>

#include "segadv/data/shapes.hpp"

namespace segadv {

// Plain-text dataset listing:
//
//   segadv-manifest 1
//   num_classes <int>
//   norm_mean <f> <f> <f>
//   norm_std <f> <f> <f>
//   item <id> <image.ppm> <labels.pgm>
//   ...
//
// '#' lines are comments. Item paths are relative to the manifest's directory.
struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::string label_path;
};

struct Manifest {
  int num_classes = 0;
  ChannelStats stats;
  std::vector<ManifestEntry> items;
  std::string base_dir;  // directory the item paths are relative to

  static Manifest load(const std::string& path);
  void save(const std::string& path) const;

  // Reads every listed image; fails on the first missing or malformed file.
  std::vector<LabeledImage> load_images() const;
};

// Writes `images` as PPM/PGM pairs under `dir` plus a manifest at
// `dir/<name>.manifest`. Returns the manifest path.
std::string write_split(const std::string& dir, const std::string& name, const std::vector<LabeledImage>& images,
                        int num_classes, const ChannelStats& stats);

}  // namespace segadv
