#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segadv/data/shapes.hpp"
#include "segadv/model/prob_map.hpp"
#include "segadv/tensor/tape.hpp"

namespace segadv {

struct ConvLayerSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  bool operator==(const ConvLayerSpec&) const = default;
};

// Stack of stride-1 "same" convolutions with ReLU between them; the last
// layer emits one logit map per class.
struct Architecture {
  std::size_t in_channels = 3;
  std::vector<ConvLayerSpec> layers;

  std::size_t num_classes() const { return layers.empty() ? 0 : layers.back().out_channels; }
  void validate() const;

  // 3 -> 16 -> 32 -> 32 -> num_classes, 3x3 kernels.
  static Architecture default_fcn(std::size_t num_classes);

  bool operator==(const Architecture&) const = default;
};

// Fully-convolutional segmentation network. Inputs are raw [0, 255] images;
// per-channel normalization (x - mean) / std happens inside forward, so
// input gradients are taken in pixel units.
class SegModel {
 public:
  // Parameters zero-initialized.
  SegModel(Architecture arch, ChannelStats norm);
  // He-normal weights (std sqrt(2 / fan_in)) from the portable PRNG, zero biases.
  static SegModel he_init(Architecture arch, ChannelStats norm, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  std::size_t num_classes() const { return arch_.num_classes(); }
  const ChannelStats& normalization() const { return norm_; }

  // conv0.weight, conv0.bias, conv1.weight, ...
  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::string parameter_name(std::size_t i) const;
  Shape parameter_shape(std::size_t i) const;

  // Puts the parameters on `tape`, as leaves when trainable, else constants.
  template <typename T>
  std::vector<BasicVar<T>> bind(BasicTape<T>& tape, bool trainable) const;

  // Logits (C, H, W) for image (3, H, W).
  template <typename T>
  BasicVar<T> forward(BasicVar<T> image, std::span<const BasicVar<T>> params) const;

  // Forward with the parameters as constants.
  template <typename T>
  BasicVar<T> logits(BasicVar<T> image) const {
    const auto params = bind(image.tape(), false);
    return forward<T>(image, params);
  }

 private:
  Architecture arch_;
  ChannelStats norm_;
  std::vector<Tensor> params_;
};

// Softmax probabilities of the model on one image.
ProbMap predict(const SegModel& model, const Tensor& image);

}  // namespace segadv
