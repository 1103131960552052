#include <cmath>
#include <random>

#include "doctest.h"
#include "segadv/tensor/gradient_check.hpp"
#include "segadv/tensor/ops.hpp"

using namespace segadv;

namespace {

Tensor64 random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor64 t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

// Direct summation over the receptive field, zero outside the image.
Tensor64 naive_conv(const Tensor64& x, const Tensor64& w) {
  const auto cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0), k = w.dim(2);
  const long pad = static_cast<long>(k / 2);
  Tensor64 out(Shape{cout, h, wd});
  for (std::size_t co = 0; co < cout; ++co)
    for (long y = 0; y < static_cast<long>(h); ++y)
      for (long xx = 0; xx < static_cast<long>(wd); ++xx) {
        double s = 0;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (long ky = 0; ky < static_cast<long>(k); ++ky)
            for (long kx = 0; kx < static_cast<long>(k); ++kx) {
              const long sy = y + ky - pad, sx = xx + kx - pad;
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(wd)) continue;
              s += w[((co * cin + ci) * k + ky) * k + kx] * x.at(ci, sy, sx);
            }
        out.at(co, y, xx) = s;
      }
  return out;
}

LabelMap random_labels(std::size_t h, std::size_t w, int classes, std::mt19937_64& rng) {
  LabelMap l(h, w);
  std::uniform_int_distribution<int> d(0, classes - 1);
  for (auto& v : l.data) v = d(rng);
  return l;
}

}  // namespace

TEST_CASE("conv2d with an identity 1x1 kernel leaves the image unchanged") {
  std::mt19937_64 rng(1);
  Tensor img(Shape{3, 5, 4});
  for (auto& v : img.data()) v = static_cast<float>(rng() % 256);
  Tensor k(Shape{3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) k[c * 3 + c] = 1.0f;
  Tape tape;
  auto out = ops::conv2d(tape.constant(img), tape.constant(k));
  CHECK(out.value() == img);
}

TEST_CASE("conv2d of all-ones 3x3 image with all-ones kernel") {
  Tape tape;
  auto out = ops::conv2d(tape.constant(Tensor(Shape{1, 3, 3}, 1.0f)), tape.constant(Tensor(Shape{1, 1, 3, 3}, 1.0f)));
  const auto oracle = naive_conv(Tensor64(Shape{1, 3, 3}, 1.0), Tensor64(Shape{1, 1, 3, 3}, 1.0));
  CHECK(oracle.at(0, 1, 1) == 9.0);
  CHECK(oracle.at(0, 0, 0) == 4.0);
  CHECK(out.value().at(0, 1, 1) == 9.0f);
  CHECK(out.value().at(0, 0, 0) == 4.0f);
  CHECK(out.value().at(0, 2, 2) == 4.0f);
  CHECK(out.value().at(0, 0, 1) == 6.0f);
}

TEST_CASE("conv2d matches direct summation on random multi-channel input") {
  std::mt19937_64 rng(2);
  const auto x = random_tensor({3, 7, 6}, rng);
  const auto w = random_tensor({4, 3, 3, 3}, rng);
  Tape64 tape;
  auto out = ops::conv2d(tape.constant(x), tape.constant(w));
  const auto ref = naive_conv(x, w);
  for (std::size_t i = 0; i < ref.numel(); ++i) CHECK(out.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("softmax of equal logits is uniform") {
  Tape tape;
  auto p = ops::softmax_channels(tape.constant(Tensor(Shape{4, 2, 3}, 0.7f)));
  for (float v : p.value().data()) CHECK(v == doctest::Approx(0.25f));
}

TEST_CASE("softmax rows sum to one and stay in [0, 1]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto logits = random_tensor({5, 4, 4}, rng, -30.0, 30.0).cast<float>();
    Tape tape;
    const auto& p = ops::softmax_channels(tape.constant(logits)).value();
    for (std::size_t px = 0; px < 16; ++px) {
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) {
        const float v = p[c * 16 + px];
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("backward of sum gives ones") {
  Tape tape;
  auto x = tape.leaf(Tensor(Shape{2, 3, 4}, 0.5f));
  tape.backward(ops::sum(x));
  CHECK(x.grad() == Tensor(Shape{2, 3, 4}, 1.0f));
}

TEST_CASE("backward of sum(x*x) at [1,2,3] is [2,4,6]") {
  Tape tape;
  auto x = tape.leaf(Tensor(Shape{3}, std::vector<float>{1, 2, 3}));
  tape.backward(ops::sum(ops::mul(x, x)));
  CHECK(x.grad() == Tensor(Shape{3}, std::vector<float>{2, 4, 6}));
}

TEST_CASE("cross-entropy gradient matches finite differences") {
  std::mt19937_64 rng(4);
  const auto labels = random_labels(4, 4, 2, rng);
  const auto logits = random_tensor({2, 4, 4}, rng, -3.0, 3.0);
  ScalarFn<double> f = [&](Tape64&, Var64 x) { return ops::mean(ops::pixel_cross_entropy(x, labels)); };
  const auto r = gradient_check(f, logits, {.step = 1e-3});
  CHECK(r.checked == 32);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("cross-entropy value is -log softmax at the label") {
  Tape64 tape;
  LabelMap l(1, 1);
  l.data[0] = 2;
  auto ce = ops::pixel_cross_entropy(tape.constant(Tensor64(Shape{3, 1, 1}, std::vector<double>{1.0, 2.0, 3.0})), l);
  const double expected = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  CHECK(ce.value()[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("every differentiable op passes a random gradient check") {
  std::mt19937_64 rng(5);
  const auto other = random_tensor({2, 3, 4}, rng);
  const auto weight = random_tensor({3, 2, 3, 3}, rng);
  const auto bias = random_tensor({2}, rng);
  const std::vector<double> sc{0.5, -2.0}, sh{1.0, 3.0};

  // Fixed non-uniform weights so reductions see a non-symmetric upstream gradient.
  auto weighted_any = [&](Tape64& t, Var64 y) {
    Tensor64 m(y.shape());
    for (std::size_t i = 0; i < m.numel(); ++i) m[i] = std::sin(1.0 + static_cast<double>(i));
    return ops::sum(ops::mul(y, t.constant(m)));
  };

  struct Case {
    const char* name;
    ScalarFn<double> f;
    double lo, hi;
  };
  std::vector<Case> cases = {
      {"conv2d input", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::conv2d(x, t.constant(weight))); }, -1, 1},
      {"conv2d weight", [&](Tape64& t, Var64 w) { return weighted_any(t, ops::conv2d(t.constant(other), w)); }, -1, 1},
      {"bias_add", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::bias_add(x, t.constant(bias))); }, -1, 1},
      {"channel_affine", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::channel_affine<double>(x, sc, sh)); }, -1, 1},
      {"relu", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::relu(x)); }, 0.1, 1},
      {"softmax", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::softmax_channels(x)); }, -2, 2},
      {"add", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::add(x, ops::mul(x, x))); }, -1, 1},
      {"sub", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::sub(t.constant(other), ops::mul(x, x))); }, -1, 1},
      {"mul", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::mul(x, t.constant(other))); }, -1, 1},
      {"scale", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::scale(x, -1.7)); }, -1, 1},
      {"log", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::log(x)); }, 0.2, 2},
      {"exp", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::exp(x)); }, -1, 1},
      {"mean", [&](Tape64&, Var64 x) { return ops::mean(ops::mul(x, x)); }, -1, 1},
      {"sum axis 0", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::sum(x, 0)); }, -1, 1},
      {"sum axis 2", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::sum(x, 2)); }, -1, 1},
      {"mean axis 1", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::mean(x, 1)); }, -1, 1},
      {"clamp interior", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::clamp(x, -5.0, 5.0)); }, -1, 1},
      {"clamp saturated", [&](Tape64& t, Var64 x) { return weighted_any(t, ops::clamp(x, 2.0, 3.0)); }, -1, 1},
      {"pick", [&](Tape64&, Var64 x) { return ops::pick(ops::exp(x), 7); }, -1, 1},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto x = std::string(c.name) == "conv2d weight" ? random_tensor(Shape{3, 2, 3, 3}, rng, c.lo, c.hi)
                                                          : random_tensor(Shape{2, 3, 4}, rng, c.lo, c.hi);
    const auto r = gradient_check(c.f, x, {.step = 1e-4});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradient_check of sum has zero error") {
  std::mt19937_64 rng(6);
  ScalarFn<double> f = [](Tape64&, Var64 x) { return ops::sum(x); };
  const auto r = gradient_check(f, random_tensor({3, 4}, rng));
  CHECK(r.max_rel_error < 1e-10);
}

TEST_CASE("sign has zero gradient and discontinuities are flagged") {
  ScalarFn<double> f = [](Tape64&, Var64 x) { return ops::sum(ops::sign(x)); };
  Tape64 tape;
  auto x = tape.leaf(Tensor64(Shape{4}, std::vector<double>{-1.0, 0.0, 2e-4, 3.0}));
  tape.backward(f(tape, x));
  CHECK(x.grad() == Tensor64(Shape{4}, 0.0));

  const auto r = gradient_check(f, x.value(), {.step = 1e-3, .skip_kinks = true});
  CHECK(r.skipped == 2);
  CHECK(r.checked == 2);
  CHECK(r.max_rel_error == 0.0);
}

TEST_CASE("gradient_check reports non-finite evaluations with the element index") {
  ScalarFn<double> f = [](Tape64&, Var64 x) { return ops::sum(ops::exp(ops::scale(x, 1e6))); };
  Tensor64 x(Shape{3}, std::vector<double>{-1.0, -1.0, 1.0});
  CHECK_THROWS_WITH_AS(gradient_check(f, x), doctest::Contains("element"), DomainError);
}

TEST_CASE("stop_gradient is identity forward and blocks gradient") {
  Tape tape;
  auto x = tape.leaf(Tensor(Shape{3}, std::vector<float>{1, -2, 3}));
  auto s = ops::stop_gradient(x);
  CHECK(s.value() == x.value());
  tape.backward(ops::sum(ops::add(ops::mul(s, s), x)));
  CHECK(x.grad() == Tensor(Shape{3}, 1.0f));
}

TEST_CASE("clamp output stays within bounds") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_tensor({50}, rng, -10, 10).cast<float>();
    Tape tape;
    for (float v : ops::clamp(tape.constant(x), -1.5f, 2.5f).value().data()) {
      CHECK(v >= -1.5f);
      CHECK(v <= 2.5f);
    }
  }
}

TEST_CASE("backward is linear in the root") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x0 = random_tensor({2, 4, 4}, rng);
    const auto labels = random_labels(4, 4, 2, rng);
    auto l1 = [&](Var64 x) { return ops::mean(ops::pixel_cross_entropy(x, labels)); };
    auto l2 = [&](Var64 x) { return ops::sum(ops::exp(x)); };

    Tape64 ta, tb, tc;
    auto xa = ta.leaf(x0), xb = tb.leaf(x0), xc = tc.leaf(x0);
    ta.backward(l1(xa));
    tb.backward(l2(xb));
    tc.backward(ops::add(l1(xc), l2(xc)));
    for (std::size_t i = 0; i < x0.numel(); ++i)
      CHECK(xc.grad()[i] == doctest::Approx(xa.grad()[i] + xb.grad()[i]).epsilon(1e-12));
  }
}

TEST_CASE("constants are never touched by backward") {
  Tape tape;
  auto c = tape.constant(Tensor(Shape{2}, 3.0f));
  auto x = tape.leaf(Tensor(Shape{2}, 1.0f));
  tape.backward(ops::sum(ops::mul(c, x)));
  CHECK_FALSE(c.requires_grad());
  CHECK(c.grad() == Tensor(Shape{2}, 0.0f));
  CHECK(x.grad() == Tensor(Shape{2}, 3.0f));
}

TEST_CASE("tape records in topological order") {
  Tape tape;
  auto x = tape.leaf(Tensor(Shape{1, 3, 3}, 1.0f));
  auto y = ops::relu(ops::conv2d(x, tape.leaf(Tensor(Shape{2, 1, 3, 3}, 0.1f))));
  ops::sum(ops::softmax_channels(y));
  for (std::size_t id = 0; id < tape.size(); ++id)
    for (std::size_t in : tape.inputs(id)) CHECK(in < id);
}

TEST_CASE("op errors") {
  Tape tape;
  auto a = tape.leaf(Tensor(Shape{2, 3}));
  auto b = tape.leaf(Tensor(Shape{3, 2}));
  CHECK_THROWS_WITH_AS(ops::add(a, b), "add: shape mismatch [2, 3] vs [3, 2]", ShapeError);
  CHECK_THROWS_AS(ops::log(a), DomainError);
  CHECK_THROWS_AS(tape.backward(a), UsageError);
  CHECK_THROWS_AS(ops::softmax_channels(a), ShapeError);
  CHECK_THROWS_AS(ops::conv2d(tape.leaf(Tensor(Shape{2, 4, 4})), tape.leaf(Tensor(Shape{1, 3, 3, 3}))), ShapeError);
  LabelMap bad(1, 1);
  bad.data[0] = 5;
  CHECK_THROWS_AS(ops::pixel_cross_entropy(tape.leaf(Tensor(Shape{2, 1, 1})), bad), DomainError);
}
