#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "segadv/error.hpp"
#include "segadv/rng.hpp"
#include "segadv/tensor/ops.hpp"
#include "segadv/uncertainty/measures.hpp"

using namespace segadv;

namespace {

constexpr Measure kAll[] = {Measure::margin, Measure::max_min, Measure::mean_margin, Measure::entropy};

ProbMap column_map(const std::vector<float>& p) {
  return ProbMap(Tensor({p.size(), 1, 1}, p));
}

std::vector<double> random_distribution(std::size_t c, SplitMix64& rng) {
  std::vector<double> p(c);
  double s = 0.0;
  for (auto& v : p) {
    // Occasionally exact zeros and near one-hots.
    const double u = rng.uniform();
    v = u < 0.1 ? 0.0 : std::pow(u, 4.0);
    s += v;
  }
  if (s == 0.0) p[0] = s = 1.0;
  for (auto& v : p) v /= s;
  return p;
}

// Independent oracle: sort descending.
double sorted_margin(std::vector<double> p) {
  std::sort(p.rbegin(), p.rend());
  return p[0] - p[1];
}

}  // namespace

TEST_CASE("known values for (0.5, 0.3, 0.2)") {
  const auto p = column_map({0.5f, 0.3f, 0.2f});
  CHECK(margin(p).values[0] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(max_min_diff(p).values[0] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(mean_margin(p).values[0] == doctest::Approx(0.25).epsilon(1e-6));
  const double e = -(0.5 * std::log(0.5) + 0.3 * std::log(0.3) + 0.2 * std::log(0.2));
  CHECK(entropy(p).values[0] == doctest::Approx(e).epsilon(1e-6));
  CHECK(std::abs(entropy(p).values[0] - 1.0297) < 1e-3);
}

TEST_CASE("one-hot and uniform pixels") {
  const auto hot = column_map({0.0f, 1.0f, 0.0f});
  CHECK(margin(hot).values[0] == 1.0);
  CHECK(max_min_diff(hot).values[0] == 1.0);
  CHECK(mean_margin(hot).values[0] == 1.0);
  CHECK(entropy(hot).values[0] == 0.0);

  const auto uni = column_map({0.25f, 0.25f, 0.25f, 0.25f});
  CHECK(margin(uni).values[0] == 0.0);
  CHECK(max_min_diff(uni).values[0] == 0.0);
  CHECK(mean_margin(uni).values[0] == 0.0);
  CHECK(entropy(uni).values[0] == doctest::Approx(std::log(4.0)));
}

TEST_CASE("weight map values") {
  CHECK(weight_value(Measure::margin, 1.0) == 1.0);
  CHECK(weight_value(Measure::margin, 0.0) == doctest::Approx(2.718281828));
  const auto uni = column_map({0.25f, 0.25f, 0.25f, 0.25f});
  CHECK(weight_map(entropy(uni))[0] == doctest::Approx(4.0).epsilon(1e-7));
  CHECK(weight_map(margin(uni))[0] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("fewer than two classes is a domain error") {
  const auto p = column_map({1.0f});
  for (auto m : kAll) CHECK_THROWS_AS(compute_measure(m, p), DomainError);
}

TEST_CASE("measure names round trip") {
  for (auto m : kAll) CHECK(parse_measure(measure_name(m)) == m);
  CHECK_THROWS_AS(parse_measure("X"), ConfigError);
}

TEST_CASE("property: ranges, sort oracle, weight bounds") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t c = 2 + rng.below(7);
    const auto p = random_distribution(c, rng);
    CAPTURE(trial);
    CHECK(measure_value(Measure::margin, p) == doctest::Approx(sorted_margin(p)).epsilon(1e-12));
    for (auto m : {Measure::margin, Measure::max_min, Measure::mean_margin}) {
      const double v = measure_value(m, p);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
      const double w = weight_value(m, v);
      CHECK(w >= 1.0 - 1e-12);
      CHECK(w <= std::exp(1.0) + 1e-12);
    }
    const double e = measure_value(Measure::entropy, p);
    CHECK(e >= 0.0);
    CHECK(e <= std::log(static_cast<double>(c)) + 1e-12);
    const double we = weight_value(Measure::entropy, e);
    CHECK(we >= 1.0);
    CHECK(we <= static_cast<double>(c) + 1e-9);
    // Ordering among the margin family.
    CHECK(measure_value(Measure::margin, p) <= measure_value(Measure::mean_margin, p) + 1e-12);
    CHECK(measure_value(Measure::mean_margin, p) <= measure_value(Measure::max_min, p) + 1e-12);
  }
}

TEST_CASE("property: M, D and Mbar coincide exactly for two classes") {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_distribution(2, rng);
    const double m = measure_value(Measure::margin, p);
    CHECK(measure_value(Measure::max_min, p) == m);
    CHECK(measure_value(Measure::mean_margin, p) == m);
  }
}

TEST_CASE("property: mixing toward uniform lowers margins and raises entropy") {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 2 + rng.below(6);
    const auto p = random_distribution(c, rng);
    const double t = rng.uniform();
    std::vector<double> q(c);
    for (std::size_t k = 0; k < c; ++k) q[k] = (1.0 - t) * p[k] + t / static_cast<double>(c);
    for (auto m : {Measure::margin, Measure::max_min, Measure::mean_margin})
      CHECK(measure_value(m, q) <= measure_value(m, p) + 1e-12);
    CHECK(measure_value(Measure::entropy, q) >= measure_value(Measure::entropy, p) - 1e-12);
  }
}

namespace {

// p = sigmoid(a x + b) as a 2-class softmax over logits (0, a x + b).
ProbFn<double> linear_sigmoid(double a, double b) {
  return [a, b](Tape64& tape, Var64 x) {
    auto w = tape.constant(Tensor64({2, 1, 1, 1}, {0.0, a}));
    auto bias = tape.constant(Tensor64({2}, {0.0, b}));
    return ops::softmax_channels(ops::bias_add(ops::conv2d(x, w), bias));
  };
}

}  // namespace

TEST_CASE("boundary distance matches the exact crossing for a linear sigmoid model") {
  for (double a : {0.5, 2.0, -3.0}) {
    const double b = 0.7;
    const double crossing = -b / a;
    for (double offset : {0.01, 0.05, 0.1, -0.02, -0.08}) {
      const double x = crossing + offset / std::abs(a);
      const double exact = std::abs(x - crossing);
      const double logit = a * x + b;
      const std::size_t other = logit > 0 ? 0 : 1;
      const double d = boundary_distance(linear_sigmoid(a, b), Tensor64({1, 1, 1}, {x}), 0, other);
      CAPTURE(a);
      CAPTURE(offset);
      CHECK(std::abs(d - exact) <= 0.05 * exact);
    }
  }
}

TEST_CASE("boundary distance edge cases") {
  // Predicted class 1 at x = 1.
  const auto f = linear_sigmoid(1.0, 0.0);
  CHECK_THROWS_AS(boundary_distance(f, Tensor64({1, 1, 1}, {1.0}), 0, 1), UsageError);
  // Tie at the crossing: predicted class is 0 by the lowest-index rule.
  CHECK(boundary_distance(f, Tensor64({1, 1, 1}, {0.0}), 0, 1) == 0.0);
  // Constant model: no gradient.
  const auto flat = linear_sigmoid(0.0, 1.0);
  CHECK(std::isinf(boundary_distance(flat, Tensor64({1, 1, 1}, {3.0}), 0, 0)));
}

TEST_CASE("boundary distance on a segmentation model is finite and positive") {
  ChannelStats s;
  s.mean = {100.0f, 100.0f, 100.0f};
  s.stddev = {50.0f, 50.0f, 50.0f};
  const auto model = SegModel::he_init(Architecture::default_fcn(3), s, 9);
  Tensor image({3, 6, 6});
  SplitMix64 rng(2);
  for (auto& v : image.data()) v = static_cast<float>(rng.uniform() * 255.0);
  const auto p = predict(model, image);
  const std::size_t z = 14;
  const std::size_t other = p.argmax(z) == 0 ? 1 : 0;
  const double d = boundary_distance(model, image, z, other);
  CHECK(d > 0.0);
  CHECK(std::isfinite(d));
}
