#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "segadv/kv_config.hpp"
#include "segadv/tensor/label_map.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv {

// A (3, H, W) image with values in [0, 255] and its per-pixel ground truth.
struct LabeledImage {
  std::string id;
  Tensor image;
  LabelMap labels;
};

// Parameters of the synthetic shapes dataset. Identical specs produce
// bit-identical datasets.
struct DatasetSpec {
  int num_classes = 4;
  std::size_t height = 64;
  std::size_t width = 64;
  int min_shapes = 2;
  int max_shapes = 5;
  // Per-shape uniform color jitter around the class color, per channel.
  double color_jitter = 65.0;
  // Per-pixel additive uniform noise in [-a, a].
  double noise_amplitude = 30.0;
  std::uint64_t seed = 7;
  std::size_t train_size = 500;
  std::size_t val_size = 100;

  void validate() const;
  static DatasetSpec from_config(const KvConfig& cfg);
  KvConfig to_config() const;
};

struct Dataset {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> val;
};

enum class Split : std::uint64_t { train = 0, val = 1 };

// Per-channel statistics used to normalize model inputs.
struct ChannelStats {
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> stddev{1.0f, 1.0f, 1.0f};
};

enum class ShapeKind { circle, rectangle, triangle };

// One rasterized shape. A pixel (x, y) belongs to it when its center
// (x + 0.5, y + 0.5) satisfies contains().
struct ShapeInstance {
  ShapeKind kind = ShapeKind::circle;
  int label = 0;
  std::array<double, 3> color{};
  double cx = 0, cy = 0, r = 0;         // circle
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // rectangle [x0, x1) x [y0, y1)
  std::array<double, 6> tri{};          // triangle vertices

  bool contains(double px, double py) const;
};

// Image `index` of `split`: a pure function of (spec, split, index). Shapes
// are drawn in order, later ones occluding earlier ones; `drawn` receives
// them when given.
LabeledImage generate_image(const DatasetSpec& spec, Split split, std::size_t index,
                            std::vector<ShapeInstance>* drawn = nullptr);
Dataset generate(const DatasetSpec& spec);

ChannelStats channel_stats(const std::vector<LabeledImage>& images);

// Mean color of class k with no jitter or noise.
std::array<double, 3> class_base_color(int k);

}  // namespace segadv
