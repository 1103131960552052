#pragma once

#include <cstddef>

namespace segadv::detail {

// Zero-padded "same" cross-correlation, stride 1, odd k.
// in: (cin, h, w), weights: (cout, cin, k, k), out: (cout, h, w).
// Accumulates in double; out is overwritten.
template <typename T>
void correlate_same(const T* in, std::size_t cin, std::size_t h, std::size_t w, const T* weights, std::size_t cout,
                    std::size_t k, T* out);

// Input gradient of correlate_same: adds into grad_in (cin, h, w).
template <typename T>
void correlate_same_input_grad(const T* grad_out, std::size_t cout, std::size_t h, std::size_t w, const T* weights,
                               std::size_t cin, std::size_t k, T* grad_in);

// Weight gradient of correlate_same: adds into grad_w (cout, cin, k, k).
template <typename T>
void correlate_same_weight_grad(const T* in, std::size_t cin, std::size_t h, std::size_t w, const T* grad_out,
                                std::size_t cout, std::size_t k, T* grad_w);

}  // namespace segadv::detail
