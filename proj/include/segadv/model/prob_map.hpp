#pragma once

#include <cstddef>
#include <vector>

#include "segadv/tensor/label_map.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv {

// Per-pixel class distribution p(.|x)_z as a (C, H, W) tensor.
class ProbMap {
 public:
  ProbMap() = default;
  explicit ProbMap(Tensor probs);

  std::size_t num_classes() const { return probs_.dim(0); }
  std::size_t height() const { return probs_.dim(1); }
  std::size_t width() const { return probs_.dim(2); }
  std::size_t pixels() const { return height() * width(); }

  float operator()(std::size_t cls, std::size_t pixel) const { return probs_[cls * pixels() + pixel]; }
  const Tensor& tensor() const { return probs_; }

  // Predicted class per pixel; ties go to the lowest class index.
  std::size_t argmax(std::size_t pixel) const;
  LabelMap argmax() const;
  // p(argmax | x) per pixel.
  std::vector<float> confidence() const;

 private:
  Tensor probs_{Shape{0, 0, 0}};
};

}  // namespace segadv
