#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace segadv {

// Per-pixel class indices, row-major (H, W).
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> data;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0) : height(h), width(w), data(h * w, fill) {}

  std::size_t size() const { return data.size(); }
  std::int32_t& operator()(std::size_t y, std::size_t x) { return data[y * width + x]; }
  std::int32_t operator()(std::size_t y, std::size_t x) const { return data[y * width + x]; }

  bool operator==(const LabelMap&) const = default;
};

}  // namespace segadv
