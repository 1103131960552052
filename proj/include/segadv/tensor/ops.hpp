#pragma once

#include <cstddef>
#include <span>

#include "segadv/tensor/label_map.hpp"
#include "segadv/tensor/tape.hpp"

// Differentiable op set. Every op records its output and backward rule on
// the tape owning its inputs. Reductions and convolution inner loops
// accumulate in double regardless of T.
//
// Subgradient conventions: sign has gradient 0 everywhere, clamp passes the
// gradient where lo <= x <= hi and blocks it elsewhere, relu'(0) = 0.
namespace segadv::ops {

// x: (Cin, H, W), w: (Cout, Cin, K, K) with K odd. Stride 1, zero padding
// K/2 so the output is (Cout, H, W).
template <typename T>
BasicVar<T> conv2d(BasicVar<T> x, BasicVar<T> w);

// x: (C, H, W), b: (C).
template <typename T>
BasicVar<T> bias_add(BasicVar<T> x, BasicVar<T> b);

// x * scale[c] + shift[c] per channel of a (C, H, W) tensor. The constants
// are not differentiated.
template <typename T>
BasicVar<T> channel_affine(BasicVar<T> x, std::span<const T> scale, std::span<const T> shift);

template <typename T>
BasicVar<T> relu(BasicVar<T> x);

// Softmax over the channel axis of a (C, H, W) tensor.
template <typename T>
BasicVar<T> softmax_channels(BasicVar<T> x);

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> scale(BasicVar<T> x, T s);

// Throws DomainError if any element is <= 0.
template <typename T>
BasicVar<T> log(BasicVar<T> x);
template <typename T>
BasicVar<T> exp(BasicVar<T> x);

// Full reductions return a rank-0 tensor.
template <typename T>
BasicVar<T> sum(BasicVar<T> x);
template <typename T>
BasicVar<T> mean(BasicVar<T> x);
// Reduce one axis; the axis is removed from the shape.
template <typename T>
BasicVar<T> sum(BasicVar<T> x, std::size_t axis);
template <typename T>
BasicVar<T> mean(BasicVar<T> x, std::size_t axis);

template <typename T>
BasicVar<T> sign(BasicVar<T> x);
template <typename T>
BasicVar<T> clamp(BasicVar<T> x, T lo, T hi);
template <typename T>
BasicVar<T> stop_gradient(BasicVar<T> x);

// Single element as a rank-0 tensor.
template <typename T>
BasicVar<T> pick(BasicVar<T> x, std::size_t flat_index);

// -log softmax(logits)[label] per pixel. logits: (C, H, W); output (H, W).
template <typename T>
BasicVar<T> pixel_cross_entropy(BasicVar<T> logits, const LabelMap& labels);

}  // namespace segadv::ops
