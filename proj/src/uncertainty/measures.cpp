#include "segadv/uncertainty/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segadv/error.hpp"
#include "segadv/tensor/ops.hpp"

namespace segadv {

std::string measure_name(Measure m) {
  switch (m) {
    case Measure::margin: return "M";
    case Measure::max_min: return "D";
    case Measure::mean_margin: return "Mbar";
    case Measure::entropy: return "E";
  }
  return "?";
}

Measure parse_measure(const std::string& name) {
  if (name == "M") return Measure::margin;
  if (name == "D") return Measure::max_min;
  if (name == "Mbar") return Measure::mean_margin;
  if (name == "E") return Measure::entropy;
  throw ConfigError("unknown uncertainty measure '" + name + "' (expected M, D, Mbar or E)");
}

double measure_value(Measure m, std::span<const double> p) {
  const std::size_t c = p.size();
  if (c < 2) throw DomainError("uncertainty measures need at least 2 classes, got " + std::to_string(c));

  std::size_t top = 0;
  for (std::size_t k = 1; k < c; ++k)
    if (p[k] > p[top]) top = k;

  switch (m) {
    case Measure::margin: {
      double second = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < c; ++k)
        if (k != top) second = std::max(second, p[k]);
      return p[top] - second;
    }
    case Measure::max_min: {
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < c; ++k)
        if (k != top) lo = std::min(lo, p[k]);
      return p[top] - lo;
    }
    case Measure::mean_margin: {
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k)
        if (k != top) s += p[top] - p[k];
      return s / static_cast<double>(c - 1);
    }
    case Measure::entropy: {
      double e = 0.0;
      for (double v : p)
        if (v > 0.0) e -= v * std::log(v);
      return e;
    }
  }
  return 0.0;
}

UncertaintyMap compute_measure(Measure m, const ProbMap& p) {
  UncertaintyMap u{m, p.height(), p.width(), std::vector<double>(p.pixels())};
  std::vector<double> col(p.num_classes());
  for (std::size_t z = 0; z < p.pixels(); ++z) {
    for (std::size_t k = 0; k < col.size(); ++k) col[k] = p(k, z);
    u.values[z] = measure_value(m, col);
  }
  return u;
}

UncertaintyMap margin(const ProbMap& p) { return compute_measure(Measure::margin, p); }
UncertaintyMap max_min_diff(const ProbMap& p) { return compute_measure(Measure::max_min, p); }
UncertaintyMap mean_margin(const ProbMap& p) { return compute_measure(Measure::mean_margin, p); }
UncertaintyMap entropy(const ProbMap& p) { return compute_measure(Measure::entropy, p); }

double weight_value(Measure m, double u) { return std::exp(m == Measure::entropy ? u : 1.0 - u); }

std::vector<double> weight_map(const UncertaintyMap& u) {
  std::vector<double> w(u.values.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = weight_value(u.measure, u.values[i]);
  return w;
}

template <typename T>
double boundary_distance(const ProbFn<T>& probs, const BasicTensor<T>& x, std::size_t pixel, std::size_t other) {
  BasicTape<T> tape;
  auto xv = tape.leaf(x);
  auto p = probs(tape, xv);
  const std::size_t c = p.shape().at(0);
  const std::size_t n = p.value().numel() / c;
  if (pixel >= n) throw UsageError("boundary_distance: pixel " + std::to_string(pixel) + " out of range");
  if (other >= c) throw UsageError("boundary_distance: class " + std::to_string(other) + " out of range");

  std::size_t top = 0;
  for (std::size_t k = 1; k < c; ++k)
    if (p.value()[k * n + pixel] > p.value()[top * n + pixel]) top = k;
  if (other == top)
    throw UsageError("boundary_distance: class " + std::to_string(other) + " is the predicted class");

  auto diff = ops::sub(ops::pick(p, top * n + pixel), ops::pick(p, other * n + pixel));
  const double num = static_cast<double>(diff.value().item());
  if (num == 0.0) return 0.0;
  tape.backward(diff);
  double sq = 0.0;
  const auto grad = xv.grad();
  for (T g : grad.data()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm < 1e-12) return std::numeric_limits<double>::infinity();
  return num / norm;
}

template double boundary_distance(const ProbFn<float>&, const Tensor&, std::size_t, std::size_t);
template double boundary_distance(const ProbFn<double>&, const Tensor64&, std::size_t, std::size_t);

double boundary_distance(const SegModel& model, const Tensor& image, std::size_t pixel, std::size_t other) {
  ProbFn<double> f = [&](Tape64&, Var64 x) { return ops::softmax_channels(model.logits<double>(x)); };
  return boundary_distance(f, image.cast<double>(), pixel, other);
}

}  // namespace segadv
