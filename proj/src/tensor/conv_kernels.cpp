#include "conv_kernels.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <vector>

namespace segadv::detail {
namespace {

constexpr std::size_t kLanes = 8;  // output columns per register tile
constexpr std::size_t kBlock = 4;  // output channels per register tile

// Eight doubles as one SIMD value (GCC/Clang vector extension).
using Lanes = double __attribute__((vector_size(kLanes * sizeof(double))));

inline Lanes load(const double* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

// Input plane copied to double with a zero border of `pad` on every side
// and extra zero columns so every kLanes-wide tile reads in bounds.
struct Padded {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  template <typename T>
  Padded(const T* in, std::size_t c, std::size_t h, std::size_t w, std::size_t pad)
      : rows(h + 2 * pad), cols(round_up(w, kLanes) + 2 * pad), data(c * rows * cols, 0.0) {
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y) {
        const T* src = in + (ch * h + y) * w;
        double* dst = data.data() + (ch * rows + y + pad) * cols + pad;
        for (std::size_t x = 0; x < w; ++x) dst[x] = static_cast<double>(src[x]);
      }
  }

  const double* row(std::size_t ch, std::size_t y) const { return data.data() + (ch * rows + y) * cols; }
};

// out[co] = sum over (ci, ky, kx) of wts[co][ci][ky][kx] * padded[ci][y + ky][x + kx],
// with cout a multiple of kBlock. Summation order per output is fixed: ci, ky, kx.
template <std::size_t K, typename T>
void correlate_tiles(const Padded& in, std::size_t cin, std::size_t h, std::size_t w, const std::vector<double>& wts,
                     std::size_t cout, std::size_t cout_valid, std::size_t k_runtime, T* out, bool accumulate) {
  const std::size_t k = K ? K : k_runtime;
  const std::size_t taps = k * k;
  for (std::size_t co0 = 0; co0 < cout; co0 += kBlock) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xb = 0; xb < w; xb += kLanes) {
        Lanes acc[kBlock] = {};
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* wbase = wts.data() + (co0 * cin + ci) * taps;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const double* row = in.row(ci, y + ky) + xb;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const Lanes s = load(row + kx);
              for (std::size_t j = 0; j < kBlock; ++j) acc[j] += wbase[j * cin * taps + ky * k + kx] * s;
            }
          }
        }
        const std::size_t xn = std::min(kLanes, w - xb);
        for (std::size_t j = 0; j < kBlock && co0 + j < cout_valid; ++j) {
          T* o = out + ((co0 + j) * h + y) * w + xb;
          for (std::size_t l = 0; l < xn; ++l) {
            if (accumulate) {
              o[l] += static_cast<T>(acc[j][l]);
            } else {
              o[l] = static_cast<T>(acc[j][l]);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void correlate_padded(const Padded& in, std::size_t cin, std::size_t h, std::size_t w, const std::vector<double>& wts,
                      std::size_t cout, std::size_t cout_valid, std::size_t k, T* out, bool accumulate) {
  if (k == 3) {
    correlate_tiles<3>(in, cin, h, w, wts, cout, cout_valid, k, out, accumulate);
  } else if (k == 1) {
    correlate_tiles<1>(in, cin, h, w, wts, cout, cout_valid, k, out, accumulate);
  } else {
    correlate_tiles<0>(in, cin, h, w, wts, cout, cout_valid, k, out, accumulate);
  }
}

// Per (co, ci) pair: one lane-wise partial sum per kernel tap, reduced at the
// end. K > 0 fixes the kernel size at compile time so the partials stay in
// registers.
template <std::size_t K, typename T>
void weight_grad_tiles(const Padded& in, std::size_t cin, std::size_t h, std::size_t gcols,
                       const std::vector<double>& g, std::size_t cout, T* grad_w, std::size_t k_runtime = K) {
  const std::size_t k = K ? K : k_runtime;
  const std::size_t taps = k * k;
  std::vector<Lanes> heap(K ? 0 : taps);
  Lanes fixed[K ? K * K : 1];
  Lanes* part = K ? fixed : heap.data();
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t t = 0; t < taps; ++t) part[t] = Lanes{};
      for (std::size_t y = 0; y < h; ++y) {
        const double* grow = g.data() + (co * h + y) * gcols;
        for (std::size_t xb = 0; xb < gcols; xb += kLanes) {
          const Lanes gv = load(grow + xb);
          for (std::size_t ky = 0; ky < k; ++ky) {
            const double* row = in.row(ci, y + ky) + xb;
            for (std::size_t kx = 0; kx < k; ++kx) part[ky * k + kx] += gv * load(row + kx);
          }
        }
      }
      T* dst = grad_w + (co * cin + ci) * taps;
      for (std::size_t t = 0; t < taps; ++t) {
        double s = 0.0;
        for (std::size_t l = 0; l < kLanes; ++l) s += part[t][l];
        dst[t] += static_cast<T>(s);
      }
    }
  }
}

}  // namespace

template <typename T>
void correlate_same(const T* in, std::size_t cin, std::size_t h, std::size_t w, const T* weights, std::size_t cout,
                    std::size_t k, T* out) {
  const Padded padded(in, cin, h, w, k / 2);
  const std::size_t cout4 = round_up(cout, kBlock);
  std::vector<double> wts(cout4 * cin * k * k, 0.0);
  std::copy(weights, weights + cout * cin * k * k, wts.begin());
  correlate_padded(padded, cin, h, w, wts, cout4, cout, k, out, false);
}

template <typename T>
void correlate_same_input_grad(const T* grad_out, std::size_t cout, std::size_t h, std::size_t w, const T* weights,
                               std::size_t cin, std::size_t k, T* grad_in) {
  // Correlating the output gradient with the channel-transposed, spatially
  // flipped kernel.
  const Padded padded(grad_out, cout, h, w, k / 2);
  const std::size_t cin4 = round_up(cin, kBlock);
  const std::size_t taps = k * k;
  std::vector<double> wts(cin4 * cout * taps, 0.0);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t t = 0; t < taps; ++t)
        wts[(ci * cout + co) * taps + (taps - 1 - t)] = static_cast<double>(weights[(co * cin + ci) * taps + t]);
  correlate_padded(padded, cout, h, w, wts, cin4, cin, k, grad_in, true);
}

template <typename T>
void correlate_same_weight_grad(const T* in, std::size_t cin, std::size_t h, std::size_t w, const T* grad_out,
                                std::size_t cout, std::size_t k, T* grad_w) {
  const Padded padded(in, cin, h, w, k / 2);
  const std::size_t gcols = round_up(w, kLanes);
  std::vector<double> g(cout * h * gcols, 0.0);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) g[(co * h + y) * gcols + x] = static_cast<double>(grad_out[(co * h + y) * w + x]);

  if (k == 3) {
    weight_grad_tiles<3>(padded, cin, h, gcols, g, cout, grad_w);
  } else {
    weight_grad_tiles<0>(padded, cin, h, gcols, g, cout, grad_w, k);
  }
}

template void correlate_same<float>(const float*, std::size_t, std::size_t, std::size_t, const float*, std::size_t,
                                    std::size_t, float*);
template void correlate_same<double>(const double*, std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                                     std::size_t, double*);
template void correlate_same_input_grad<float>(const float*, std::size_t, std::size_t, std::size_t, const float*,
                                               std::size_t, std::size_t, float*);
template void correlate_same_input_grad<double>(const double*, std::size_t, std::size_t, std::size_t, const double*,
                                                std::size_t, std::size_t, double*);
template void correlate_same_weight_grad<float>(const float*, std::size_t, std::size_t, std::size_t, const float*,
                                                std::size_t, std::size_t, float*);
template void correlate_same_weight_grad<double>(const double*, std::size_t, std::size_t, std::size_t, const double*,
                                                 std::size_t, std::size_t, double*);

}  // namespace segadv::detail
