#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "segadv/model/prob_map.hpp"
#include "segadv/model/seg_model.hpp"
#include "segadv/tensor/tape.hpp"

namespace segadv {

// M: top-1 minus top-2; D: top-1 minus min; Mbar: mean margin to every
// other class; E: natural-log entropy.
enum class Measure { margin, max_min, mean_margin, entropy };

std::string measure_name(Measure m);  // "M", "D", "Mbar", "E"
Measure parse_measure(const std::string& name);

struct UncertaintyMap {
  Measure measure = Measure::margin;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major (H, W)

  double operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

// Value of a measure for one probability vector. Throws DomainError if it
// has fewer than 2 entries.
double measure_value(Measure m, std::span<const double> p);

UncertaintyMap compute_measure(Measure m, const ProbMap& p);
UncertaintyMap margin(const ProbMap& p);
UncertaintyMap max_min_diff(const ProbMap& p);
UncertaintyMap mean_margin(const ProbMap& p);
UncertaintyMap entropy(const ProbMap& p);

// e^U with U = 1 - M, 1 - D, 1 - Mbar or E.
double weight_value(Measure m, double u);
std::vector<double> weight_map(const UncertaintyMap& u);

// Maps a batch of inputs to probabilities of shape (C, ...); pixel z of
// class c is flat element c * (numel / C) + z.
template <typename T>
using ProbFn = std::function<BasicVar<T>(BasicTape<T>&, BasicVar<T>)>;

// First-order distance of pixel z to the boundary between its predicted
// class and `other`:
//   (p(yhat) - p(other)) / ||grad_x (p(yhat) - p(other))||_2
// Returns infinity when the gradient norm is below 1e-12 and 0 when the two
// probabilities tie. Throws UsageError when `other` is the predicted class.
template <typename T>
double boundary_distance(const ProbFn<T>& probs, const BasicTensor<T>& x, std::size_t pixel, std::size_t other);

double boundary_distance(const SegModel& model, const Tensor& image, std::size_t pixel, std::size_t other);

}  // namespace segadv
