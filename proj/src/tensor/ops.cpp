#include "segadv/tensor/ops.hpp"

#include "conv_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace segadv::ops {
namespace {

template <typename T>
void require_rank(const char* op, const BasicVar<T>& v, std::size_t rank) {
  if (v.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(v.shape()));
  }
}

template <typename T>
void require_same(const char* op, const BasicVar<T>& a, const BasicVar<T>& b) {
  if (&a.tape() != &b.tape()) throw UsageError(std::string(op) + ": operands live on different tapes");
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

template <typename T>
BasicVar<T> conv2d(BasicVar<T> x, BasicVar<T> w) {
  require_rank("conv2d", x, 3);
  require_rank("conv2d", w, 4);
  if (&x.tape() != &w.tape()) throw UsageError("conv2d: operands live on different tapes");
  const Shape xs = x.shape(), ws = w.shape();
  const std::size_t cin = xs[0], h = xs[1], wd = xs[2];
  const std::size_t cout = ws[0], k = ws[2];
  if (ws[1] != cin || ws[3] != k || k % 2 == 0) {
    throw ShapeError("conv2d: input " + shape_str(xs) + " incompatible with kernel " + shape_str(ws));
  }
  BasicTensor<T> out(Shape{cout, h, wd});
  detail::correlate_same(x.value().data().data(), cin, h, wd, w.value().data().data(), cout, k, out.data().data());

  const std::size_t xi = x.id(), wi = w.id();
  return x.tape().record("conv2d", std::move(out), {xi, wi},
                         [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
                           if (t.requires_grad(xi)) {
                             detail::correlate_same_input_grad(g.data(), cout, h, wd, t.value(wi).data().data(), cin,
                                                               k, t.grad_buffer(xi).data());
                           }
                           if (t.requires_grad(wi)) {
                             detail::correlate_same_weight_grad(t.value(xi).data().data(), cin, h, wd, g.data(), cout,
                                                                k, t.grad_buffer(wi).data());
                           }
                         });
}

template <typename T>
BasicVar<T> bias_add(BasicVar<T> x, BasicVar<T> b) {
  require_rank("bias_add", x, 3);
  require_rank("bias_add", b, 1);
  if (b.shape()[0] != x.shape()[0]) {
    throw ShapeError("bias_add: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
  BasicTensor<T> out = x.value();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T bv = b.value()[ch];
    for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] += bv;
  }
  const std::size_t xi = x.id(), bi = b.id();
  return x.tape().record("bias_add", std::move(out), {xi, bi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    if (t.requires_grad(xi)) {
      auto& gx = t.grad_buffer(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      auto& gb = t.grad_buffer(bi);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += g[ch * hw + i];
        gb[ch] += static_cast<T>(s);
      }
    }
  });
}

template <typename T>
BasicVar<T> channel_affine(BasicVar<T> x, std::span<const T> scale, std::span<const T> shift) {
  require_rank("channel_affine", x, 3);
  const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
  if (scale.size() != c || shift.size() != c) {
    throw ShapeError("channel_affine: input " + shape_str(x.shape()) + " vs " + std::to_string(scale.size()) +
                     " scale / " + std::to_string(shift.size()) + " shift constants");
  }
  BasicTensor<T> out = x.value();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] = out[ch * hw + i] * scale[ch] + shift[ch];
  std::vector<T> sc(scale.begin(), scale.end());
  const std::size_t xi = x.id();
  return x.tape().record("channel_affine", std::move(out), {xi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    auto& gx = t.grad_buffer(xi);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i) gx[ch * hw + i] += g[ch * hw + i] * sc[ch];
  });
}

template <typename T>
BasicVar<T> relu(BasicVar<T> x) {
  BasicTensor<T> out = x.value();
  for (auto& v : out.data()) v = v > T(0) ? v : T(0);
  const std::size_t xi = x.id();
  return x.tape().record("relu", std::move(out), {xi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    const auto& xv = t.value(xi);
    auto& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > T(0)) gx[i] += g[i];
  });
}

template <typename T>
BasicVar<T> softmax_channels(BasicVar<T> x) {
  require_rank("softmax_channels", x, 3);
  const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
  const auto& xv = x.value();
  BasicTensor<T> out(x.shape());
  std::vector<double> e(c);
  for (std::size_t p = 0; p < hw; ++p) {
    double m = xv[p];
    for (std::size_t ch = 1; ch < c; ++ch) m = std::max(m, static_cast<double>(xv[ch * hw + p]));
    double s = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) s += e[ch] = std::exp(static_cast<double>(xv[ch * hw + p]) - m);
    for (std::size_t ch = 0; ch < c; ++ch) out[ch * hw + p] = static_cast<T>(e[ch] / s);
  }
  const std::size_t xi = x.id();
  return x.tape().record("softmax_channels", std::move(out), {xi},
                         [=](BasicTape<T>& t, const BasicTensor<T>& pv, std::span<const T> g) {
                           auto& gx = t.grad_buffer(xi);
                           for (std::size_t p = 0; p < hw; ++p) {
                             double dot = 0.0;
                             for (std::size_t ch = 0; ch < c; ++ch)
                               dot += static_cast<double>(g[ch * hw + p]) * pv[ch * hw + p];
                             for (std::size_t ch = 0; ch < c; ++ch)
                               gx[ch * hw + p] +=
                                   static_cast<T>(pv[ch * hw + p] * (static_cast<double>(g[ch * hw + p]) - dot));
                           }
                         });
}

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b) {
  require_same("add", a, b);
  BasicTensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("add", std::move(out), {ai, bi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    for (std::size_t id : {ai, bi}) {
      if (!t.requires_grad(id)) continue;
      auto& gi = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b) {
  require_same("sub", a, b);
  BasicTensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("sub", std::move(out), {ai, bi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    if (t.requires_grad(ai)) {
      auto& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      auto& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b) {
  require_same("mul", a, b);
  BasicTensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record("mul", std::move(out), {ai, bi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    const auto& av = t.value(ai);
    const auto& bv = t.value(bi);
    if (t.requires_grad(ai)) {
      auto& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      auto& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
BasicVar<T> scale(BasicVar<T> x, T s) {
  BasicTensor<T> out = x.value();
  for (auto& v : out.data()) v *= s;
  const std::size_t xi = x.id();
  return x.tape().record("scale", std::move(out), {xi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    auto& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
  });
}

template <typename T>
BasicVar<T> log(BasicVar<T> x) {
  const auto& xv = x.value();
  BasicTensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    if (!(xv[i] > T(0))) {
      throw DomainError("log: non-positive value " + std::to_string(xv[i]) + " at element " + std::to_string(i));
    }
    out[i] = std::log(xv[i]);
  }
  const std::size_t xi = x.id();
  return x.tape().record("log", std::move(out), {xi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    const auto& xv = t.value(xi);
    auto& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
  });
}

template <typename T>
BasicVar<T> exp(BasicVar<T> x) {
  BasicTensor<T> out = x.value();
  for (auto& v : out.data()) v = std::exp(v);
  const std::size_t xi = x.id();
  return x.tape().record("exp", std::move(out), {xi}, [=](BasicTape<T>& t, const BasicTensor<T>& ov, std::span<const T> g) {
    auto& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * ov[i];
  });
}

template <typename T>
BasicVar<T> sum(BasicVar<T> x) {
  double s = 0.0;
  for (T v : x.value().data()) s += v;
  const std::size_t xi = x.id();
  return x.tape().record("sum", BasicTensor<T>::scalar(static_cast<T>(s)), {xi},
                         [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
                           auto& gx = t.grad_buffer(xi);
                           for (auto& v : gx) v += g[0];
                         });
}

template <typename T>
BasicVar<T> mean(BasicVar<T> x) {
  const std::size_t n = x.value().numel();
  if (n == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (T v : x.value().data()) s += v;
  const std::size_t xi = x.id();
  return x.tape().record("mean", BasicTensor<T>::scalar(static_cast<T>(s / static_cast<double>(n))), {xi},
                         [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
                           auto& gx = t.grad_buffer(xi);
                           const T gv = static_cast<T>(static_cast<double>(g[0]) / static_cast<double>(n));
                           for (auto& v : gx) v += gv;
                         });
}

namespace {

template <typename T>
BasicVar<T> reduce_axis(const char* name, BasicVar<T> x, std::size_t axis, bool average) {
  const Shape& xs = x.shape();
  if (axis >= xs.size()) {
    throw ShapeError(std::string(name) + ": axis " + std::to_string(axis) + " out of range for shape " + shape_str(xs));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= xs[d];
  for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
  const std::size_t n = xs[axis];
  if (average && n == 0) throw ShapeError(std::string(name) + ": empty axis");
  const double div = average ? static_cast<double>(n) : 1.0;
  Shape os = xs;
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  BasicTensor<T> out(os);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += xv[(o * n + k) * inner + i];
      out[o * inner + i] = static_cast<T>(s / div);
    }
  }
  const std::size_t xi = x.id();
  return x.tape().record(name, std::move(out), {xi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    auto& gx = t.grad_buffer(xi);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < inner; ++i)
          gx[(o * n + k) * inner + i] += static_cast<T>(static_cast<double>(g[o * inner + i]) / div);
  });
}

}  // namespace

template <typename T>
BasicVar<T> sum(BasicVar<T> x, std::size_t axis) {
  return reduce_axis("sum_axis", x, axis, false);
}

template <typename T>
BasicVar<T> mean(BasicVar<T> x, std::size_t axis) {
  return reduce_axis("mean_axis", x, axis, true);
}

template <typename T>
BasicVar<T> sign(BasicVar<T> x) {
  BasicTensor<T> out = x.value();
  for (auto& v : out.data()) v = static_cast<T>((v > T(0)) - (v < T(0)));
  // Zero gradient: record without inputs so nothing flows back.
  return x.tape().record("sign", std::move(out), {}, {});
}

template <typename T>
BasicVar<T> clamp(BasicVar<T> x, T lo, T hi) {
  if (lo > hi) throw DomainError("clamp: lo " + std::to_string(lo) + " > hi " + std::to_string(hi));
  BasicTensor<T> out = x.value();
  for (auto& v : out.data()) v = std::clamp(v, lo, hi);
  const std::size_t xi = x.id();
  return x.tape().record("clamp", std::move(out), {xi}, [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
    const auto& xv = t.value(xi);
    auto& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] >= lo && xv[i] <= hi) gx[i] += g[i];
  });
}

template <typename T>
BasicVar<T> stop_gradient(BasicVar<T> x) {
  return x.tape().record("stop_gradient", x.value(), {}, {});
}

template <typename T>
BasicVar<T> pick(BasicVar<T> x, std::size_t flat_index) {
  if (flat_index >= x.value().numel()) {
    throw ShapeError("pick: index " + std::to_string(flat_index) + " out of range for shape " + shape_str(x.shape()));
  }
  const std::size_t xi = x.id();
  return x.tape().record("pick", BasicTensor<T>::scalar(x.value()[flat_index]), {xi},
                         [=](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
                           t.grad_buffer(xi)[flat_index] += g[0];
                         });
}

template <typename T>
BasicVar<T> pixel_cross_entropy(BasicVar<T> logits, const LabelMap& labels) {
  require_rank("pixel_cross_entropy", logits, 3);
  const Shape& ls = logits.shape();
  const std::size_t c = ls[0], hw = ls[1] * ls[2];
  if (labels.height != ls[1] || labels.width != ls[2] || labels.size() != hw) {
    throw ShapeError("pixel_cross_entropy: logits " + shape_str(ls) + " vs labels " +
                     shape_str(Shape{labels.height, labels.width}));
  }
  const auto& lv = logits.value();
  BasicTensor<T> out(Shape{ls[1], ls[2]});
  std::vector<T> probs(c * hw);
  for (std::size_t p = 0; p < hw; ++p) {
    const std::int32_t y = labels.data[p];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw DomainError("pixel_cross_entropy: label " + std::to_string(y) + " at pixel " + std::to_string(p) +
                        " outside [0, " + std::to_string(c) + ")");
    }
    double m = lv[p];
    for (std::size_t ch = 1; ch < c; ++ch) m = std::max(m, static_cast<double>(lv[ch * hw + p]));
    double s = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) s += std::exp(static_cast<double>(lv[ch * hw + p]) - m);
    const double lse = m + std::log(s);
    for (std::size_t ch = 0; ch < c; ++ch)
      probs[ch * hw + p] = static_cast<T>(std::exp(static_cast<double>(lv[ch * hw + p]) - lse));
    out[p] = static_cast<T>(lse - static_cast<double>(lv[static_cast<std::size_t>(y) * hw + p]));
  }
  const std::size_t li = logits.id();
  return logits.tape().record(
      "pixel_cross_entropy", std::move(out), {li},
      [=, probs = std::move(probs), lab = labels.data](BasicTape<T>& t, const BasicTensor<T>&, std::span<const T> g) {
        auto& gl = t.grad_buffer(li);
        for (std::size_t p = 0; p < hw; ++p) {
          const std::size_t y = static_cast<std::size_t>(lab[p]);
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T d = probs[ch * hw + p] - (ch == y ? T(1) : T(0));
            gl[ch * hw + p] += g[p] * d;
          }
        }
      });
}

#define SEGADV_INSTANTIATE_OPS(T)                                                              \
  template BasicVar<T> conv2d(BasicVar<T>, BasicVar<T>);                                       \
  template BasicVar<T> bias_add(BasicVar<T>, BasicVar<T>);                                     \
  template BasicVar<T> channel_affine(BasicVar<T>, std::span<const T>, std::span<const T>);    \
  template BasicVar<T> relu(BasicVar<T>);                                                      \
  template BasicVar<T> softmax_channels(BasicVar<T>);                                          \
  template BasicVar<T> add(BasicVar<T>, BasicVar<T>);                                          \
  template BasicVar<T> sub(BasicVar<T>, BasicVar<T>);                                          \
  template BasicVar<T> mul(BasicVar<T>, BasicVar<T>);                                          \
  template BasicVar<T> scale(BasicVar<T>, T);                                                  \
  template BasicVar<T> log(BasicVar<T>);                                                       \
  template BasicVar<T> exp(BasicVar<T>);                                                       \
  template BasicVar<T> sum(BasicVar<T>);                                                       \
  template BasicVar<T> mean(BasicVar<T>);                                                      \
  template BasicVar<T> sum(BasicVar<T>, std::size_t);                                          \
  template BasicVar<T> mean(BasicVar<T>, std::size_t);                                         \
  template BasicVar<T> sign(BasicVar<T>);                                                      \
  template BasicVar<T> clamp(BasicVar<T>, T, T);                                               \
  template BasicVar<T> stop_gradient(BasicVar<T>);                                             \
  template BasicVar<T> pick(BasicVar<T>, std::size_t);                                         \
  template BasicVar<T> pixel_cross_entropy(BasicVar<T>, const LabelMap&);

SEGADV_INSTANTIATE_OPS(float)
SEGADV_INSTANTIATE_OPS(double)

#undef SEGADV_INSTANTIATE_OPS

}  // namespace segadv::ops
