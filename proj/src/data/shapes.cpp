#include "segadv/data/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "segadv/error.hpp"
#include "segadv/rng.hpp"

namespace segadv {
namespace {

// Class 0 is background. Foreground colors are spread apart; jitter and
// noise make neighbouring distributions overlap.
constexpr std::array<std::array<double, 3>, 8> kBaseColors = {{
    {110, 110, 110},  // background
    {200, 70, 60},
    {70, 180, 80},
    {70, 90, 200},
    {200, 190, 70},
    {180, 80, 190},
    {70, 190, 190},
    {220, 140, 50},
}};

std::string image_id(Split split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", split == Split::train ? "train" : "val", index);
  return buf;
}

}  // namespace

std::array<double, 3> class_base_color(int k) {
  if (k < 0 || k >= static_cast<int>(kBaseColors.size())) throw DomainError("class_base_color: class out of range");
  return kBaseColors[static_cast<std::size_t>(k)];
}

void DatasetSpec::validate() const {
  if (num_classes < 2 || num_classes > 8) throw ConfigError("dataset: num_classes must be in [2, 8]");
  if (height < 16 || width < 16) throw ConfigError("dataset: image size must be at least 16x16");
  if (min_shapes < 0 || max_shapes < min_shapes) throw ConfigError("dataset: need 0 <= min_shapes <= max_shapes");
  if (!(noise_amplitude >= 0.0) || noise_amplitude > 255.0) throw ConfigError("dataset: noise_amplitude out of range");
  if (!(color_jitter >= 0.0) || color_jitter > 255.0) throw ConfigError("dataset: color_jitter out of range");
}

DatasetSpec DatasetSpec::from_config(const KvConfig& cfg) {
  cfg.check_keys({"num_classes", "height", "width", "min_shapes", "max_shapes", "color_jitter", "noise_amplitude",
                  "seed", "train_size", "val_size"},
                 "dataset config");
  DatasetSpec s;
  s.num_classes = static_cast<int>(cfg.get_int("num_classes", s.num_classes));
  s.height = static_cast<std::size_t>(cfg.get_int("height", static_cast<std::int64_t>(s.height)));
  s.width = static_cast<std::size_t>(cfg.get_int("width", static_cast<std::int64_t>(s.width)));
  s.min_shapes = static_cast<int>(cfg.get_int("min_shapes", s.min_shapes));
  s.max_shapes = static_cast<int>(cfg.get_int("max_shapes", s.max_shapes));
  s.color_jitter = cfg.get_double("color_jitter", s.color_jitter);
  s.noise_amplitude = cfg.get_double("noise_amplitude", s.noise_amplitude);
  s.seed = cfg.get_u64("seed", s.seed);
  s.train_size = static_cast<std::size_t>(cfg.get_int("train_size", static_cast<std::int64_t>(s.train_size)));
  s.val_size = static_cast<std::size_t>(cfg.get_int("val_size", static_cast<std::int64_t>(s.val_size)));
  s.validate();
  return s;
}

KvConfig DatasetSpec::to_config() const {
  KvConfig c;
  c.set("num_classes", std::to_string(num_classes));
  c.set("height", std::to_string(height));
  c.set("width", std::to_string(width));
  c.set("min_shapes", std::to_string(min_shapes));
  c.set("max_shapes", std::to_string(max_shapes));
  c.set("color_jitter", std::to_string(color_jitter));
  c.set("noise_amplitude", std::to_string(noise_amplitude));
  c.set("seed", std::to_string(seed));
  c.set("train_size", std::to_string(train_size));
  c.set("val_size", std::to_string(val_size));
  return c;
}

bool ShapeInstance::contains(double px, double py) const {
  switch (kind) {
    case ShapeKind::circle:
      return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r;
    case ShapeKind::rectangle:
      return px >= x0 && px < x1 && py >= y0 && py < y1;
    case ShapeKind::triangle: {
      auto edge = [&](int a, int b) {
        return (tri[2 * b] - tri[2 * a]) * (py - tri[2 * a + 1]) - (tri[2 * b + 1] - tri[2 * a + 1]) * (px - tri[2 * a]);
      };
      const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
  }
  return false;
}

LabeledImage generate_image(const DatasetSpec& spec, Split split, std::size_t index,
                            std::vector<ShapeInstance>* drawn) {
  spec.validate();
  SplitMix64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(split), index));
  const std::size_t h = spec.height, w = spec.width;
  const double side = static_cast<double>(std::min(h, w));

  LabeledImage out{image_id(split, index), Tensor(Shape{3, h, w}), LabelMap(h, w, 0)};

  // Per-pixel color before noise; background first.
  std::vector<std::array<double, 3>> color(h * w);
  std::array<double, 3> bg{};
  for (std::size_t c = 0; c < 3; ++c) bg[c] = kBaseColors[0][c] + rng.uniform(-spec.color_jitter, spec.color_jitter);
  std::fill(color.begin(), color.end(), bg);

  const auto shapes = rng.between(spec.min_shapes, spec.max_shapes);
  for (std::int64_t s = 0; s < shapes; ++s) {
    const int cls = static_cast<int>(rng.between(1, spec.num_classes - 1));
    std::array<double, 3> col{};
    for (std::size_t c = 0; c < 3; ++c) {
      col[c] = std::clamp(kBaseColors[static_cast<std::size_t>(cls)][c] + rng.uniform(-spec.color_jitter, spec.color_jitter),
                          0.0, 255.0);
    }

    ShapeInstance shape{};
    shape.label = cls;
    shape.color = col;
    shape.kind = static_cast<ShapeKind>(rng.below(3));
    const double size = rng.uniform(side / 12.0, side / 4.0);
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    switch (shape.kind) {
      case ShapeKind::circle:
        shape.cx = cx;
        shape.cy = cy;
        shape.r = size;
        break;
      case ShapeKind::rectangle: {
        const double hw = size * rng.uniform(0.6, 1.4), hh = size * rng.uniform(0.6, 1.4);
        shape.x0 = cx - hw;
        shape.x1 = cx + hw;
        shape.y0 = cy - hh;
        shape.y1 = cy + hh;
        break;
      }
      case ShapeKind::triangle:
        for (int v = 0; v < 3; ++v) {
          const double angle = rng.uniform(0.0, 6.283185307179586);
          const double radius = size * rng.uniform(1.0, 1.8);
          shape.tri[2 * v] = cx + radius * std::cos(angle);
          shape.tri[2 * v + 1] = cy + radius * std::sin(angle);
        }
        break;
    }

    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if (shape.contains(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
          out.labels(y, x) = cls;
          color[y * w + x] = col;
        }
    if (drawn) drawn->push_back(shape);
  }

  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double v = color[y * w + x][c];
        if (spec.noise_amplitude > 0.0) v += rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
        out.image.at(c, y, x) = static_cast<float>(std::clamp(std::nearbyint(v), 0.0, 255.0));
      }
  return out;
}

Dataset generate(const DatasetSpec& spec) {
  spec.validate();
  Dataset d;
  d.train.reserve(spec.train_size);
  d.val.reserve(spec.val_size);
  for (std::size_t i = 0; i < spec.train_size; ++i) d.train.push_back(generate_image(spec, Split::train, i));
  for (std::size_t i = 0; i < spec.val_size; ++i) d.val.push_back(generate_image(spec, Split::val, i));
  return d;
}

ChannelStats channel_stats(const std::vector<LabeledImage>& images) {
  if (images.empty()) throw DomainError("channel_stats: no images");
  std::array<double, 3> sum{}, sq{};
  double count = 0;
  for (const auto& img : images) {
    const std::size_t hw = img.image.dim(1) * img.image.dim(2);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < hw; ++i) {
        const double v = img.image[c * hw + i];
        sum[c] += v;
        sq[c] += v * v;
      }
    count += static_cast<double>(hw);
  }
  ChannelStats s;
  for (std::size_t c = 0; c < 3; ++c) {
    const double m = sum[c] / count;
    s.mean[c] = static_cast<float>(m);
    s.stddev[c] = static_cast<float>(std::max(std::sqrt(std::max(sq[c] / count - m * m, 0.0)), 1e-3));
  }
  return s;
}

}  // namespace segadv
