#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "segadv/tensor/label_map.hpp"
#include "segadv/tensor/tensor.hpp"

// Binary netpbm I/O: P6 (RGB) and P5 (grey), maxval 255 only. Headers may
// contain '#' comments. Errors are ParseError with the byte offset.
namespace segadv {

// Interleaved 8-bit raster as stored on disk.
struct RasterU8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 3 for P6, 1 for P5
  std::vector<std::uint8_t> pixels;
};

RasterU8 parse_netpbm(std::string_view bytes);
std::string encode_netpbm(const RasterU8& raster);

// (3, H, W) float image. Values are rounded to nearest and clamped to
// [0, 255] on write.
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

// (H, W) label map; labels must be in [0, 255] on write.
LabelMap read_pgm(const std::string& path);
void write_pgm(const std::string& path, const LabelMap& labels);

void write_raster(const std::string& path, const RasterU8& raster);

}  // namespace segadv
