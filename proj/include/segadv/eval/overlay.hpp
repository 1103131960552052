#pragma once

#include <array>
#include <cstdint>

#include "segadv/data/netpbm.hpp"
#include "segadv/tensor/label_map.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv {

// Class colors for prediction overlays:
//   0 black, 1 red, 2 green, 3 blue, 4 yellow, 5 magenta, 6 cyan, 7 orange.
std::array<std::uint8_t, 3> palette_color(std::size_t cls);

RasterU8 colorize_labels(const LabelMap& labels);

// max_c |delta| / epsilon mapped black -> red -> yellow.
RasterU8 perturbation_heatmap(const Tensor& perturbation, double epsilon);

}  // namespace segadv
