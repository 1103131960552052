#include "segadv/model/seg_model.hpp"

#include <cmath>

#include "segadv/error.hpp"
#include "segadv/rng.hpp"
#include "segadv/tensor/ops.hpp"

namespace segadv {

void Architecture::validate() const {
  if (in_channels != 3) throw ConfigError("architecture: input must have 3 channels");
  if (layers.empty()) throw ConfigError("architecture: no layers");
  for (const auto& l : layers) {
    if (l.out_channels == 0) throw ConfigError("architecture: layer with zero output channels");
    if (l.kernel % 2 == 0) throw ConfigError("architecture: kernel sizes must be odd");
  }
  if (num_classes() < 2) throw ConfigError("architecture: need at least 2 classes");
}

Architecture Architecture::default_fcn(std::size_t num_classes) {
  return Architecture{3, {{16, 3}, {32, 3}, {32, 3}, {num_classes, 3}}};
}

SegModel::SegModel(Architecture arch, ChannelStats norm) : arch_(std::move(arch)), norm_(norm) {
  arch_.validate();
  for (std::size_t i = 0; i < 2 * arch_.layers.size(); ++i) params_.emplace_back(parameter_shape(i));
}

SegModel SegModel::he_init(Architecture arch, ChannelStats norm, std::uint64_t seed) {
  SegModel m(std::move(arch), norm);
  for (std::size_t l = 0; l < m.arch_.layers.size(); ++l) {
    Tensor& w = m.params_[2 * l];
    const double fan_in = static_cast<double>(w.dim(1) * w.dim(2) * w.dim(3));
    const double std = std::sqrt(2.0 / fan_in);
    SplitMix64 rng(derive_seed(seed, 0x11717, l));
    for (auto& v : w.data()) v = static_cast<float>(std * rng.normal());
  }
  return m;
}

std::string SegModel::parameter_name(std::size_t i) const {
  return "conv" + std::to_string(i / 2) + (i % 2 == 0 ? ".weight" : ".bias");
}

Shape SegModel::parameter_shape(std::size_t i) const {
  const auto& l = arch_.layers.at(i / 2);
  if (i % 2 == 1) return Shape{l.out_channels};
  const std::size_t in = i / 2 == 0 ? arch_.in_channels : arch_.layers[i / 2 - 1].out_channels;
  return Shape{l.out_channels, in, l.kernel, l.kernel};
}

template <typename T>
std::vector<BasicVar<T>> SegModel::bind(BasicTape<T>& tape, bool trainable) const {
  std::vector<BasicVar<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) {
    auto t = p.template cast<T>();
    out.push_back(trainable ? tape.leaf(std::move(t)) : tape.constant(std::move(t)));
  }
  return out;
}

template <typename T>
BasicVar<T> SegModel::forward(BasicVar<T> image, std::span<const BasicVar<T>> params) const {
  if (image.shape().size() != 3 || image.shape()[0] != arch_.in_channels) {
    throw ShapeError("SegModel: expected (" + std::to_string(arch_.in_channels) + ", H, W) input, got " +
                     shape_str(image.shape()));
  }
  if (params.size() != params_.size()) throw UsageError("SegModel: wrong number of bound parameters");
  std::vector<T> scale(3), shift(3);
  for (std::size_t c = 0; c < 3; ++c) {
    scale[c] = static_cast<T>(1.0 / static_cast<double>(norm_.stddev[c]));
    shift[c] = static_cast<T>(-static_cast<double>(norm_.mean[c]) / static_cast<double>(norm_.stddev[c]));
  }
  BasicVar<T> x = ops::channel_affine<T>(image, scale, shift);
  for (std::size_t l = 0; l < arch_.layers.size(); ++l) {
    x = ops::bias_add(ops::conv2d(x, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < arch_.layers.size()) x = ops::relu(x);
  }
  return x;
}

template std::vector<BasicVar<float>> SegModel::bind(BasicTape<float>&, bool) const;
template std::vector<BasicVar<double>> SegModel::bind(BasicTape<double>&, bool) const;
template BasicVar<float> SegModel::forward(BasicVar<float>, std::span<const BasicVar<float>>) const;
template BasicVar<double> SegModel::forward(BasicVar<double>, std::span<const BasicVar<double>>) const;

ProbMap predict(const SegModel& model, const Tensor& image) {
  Tape tape;
  auto logits = model.logits(tape.constant(image));
  return ProbMap(ops::softmax_channels(logits).value());
}

}  // namespace segadv
