#include "segadv/eval/overlay.hpp"

#include <algorithm>
#include <cmath>

namespace segadv {

std::array<std::uint8_t, 3> palette_color(std::size_t cls) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette{{
      {0, 0, 0},
      {230, 25, 75},
      {60, 180, 75},
      {0, 130, 200},
      {255, 225, 25},
      {240, 50, 230},
      {70, 240, 240},
      {245, 130, 48},
  }};
  return kPalette[cls % kPalette.size()];
}

RasterU8 colorize_labels(const LabelMap& labels) {
  RasterU8 r{labels.width, labels.height, 3, std::vector<std::uint8_t>(labels.size() * 3)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = palette_color(static_cast<std::size_t>(std::max(0, labels.data[i])));
    std::copy(c.begin(), c.end(), r.pixels.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return r;
}

RasterU8 perturbation_heatmap(const Tensor& perturbation, double epsilon) {
  const std::size_t h = perturbation.dim(1), w = perturbation.dim(2), hw = h * w;
  RasterU8 r{w, h, 3, std::vector<std::uint8_t>(hw * 3, 0)};
  for (std::size_t i = 0; i < hw; ++i) {
    double m = 0.0;
    for (std::size_t c = 0; c < perturbation.dim(0); ++c)
      m = std::max(m, std::abs(static_cast<double>(perturbation[c * hw + i])));
    const double v = epsilon > 0.0 ? std::clamp(m / epsilon, 0.0, 1.0) : 0.0;
    r.pixels[3 * i] = static_cast<std::uint8_t>(std::lround(255.0 * std::min(1.0, 2.0 * v)));
    r.pixels[3 * i + 1] = static_cast<std::uint8_t>(std::lround(255.0 * std::max(0.0, 2.0 * v - 1.0)));
  }
  return r;
}

}  // namespace segadv
