#pragma once

#include <cstddef>
#include <functional>

#include "segadv/tensor/tape.hpp"

namespace segadv {

template <typename T>
using ScalarFn = std::function<BasicVar<T>(BasicTape<T>&, BasicVar<T>)>;

struct GradientCheckOptions {
  double step = 1e-3;
  // Skip elements where f has a kink or jump within one step: one-sided
  // slopes, or central slopes at step and step/2, disagree by more than
  // kink_tolerance (relative). Off by default.
  bool skip_kinks = false;
  double kink_tolerance = 1e-2;
};

struct GradientCheckResult {
  double max_rel_error = 0.0;  // max |a - n| / max(|a|, |n|, 1e-8)
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // elements flagged as discontinuities
};

// Compares the tape gradient of f at x with central differences. Throws
// DomainError naming the element if any evaluation is non-finite.
template <typename T>
GradientCheckResult gradient_check(const ScalarFn<T>& f, const BasicTensor<T>& x, GradientCheckOptions opts = {});

}  // namespace segadv
