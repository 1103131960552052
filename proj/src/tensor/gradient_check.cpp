#include "segadv/tensor/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace segadv {
namespace {

template <typename T>
double evaluate(const ScalarFn<T>& f, const BasicTensor<T>& x, std::size_t element, const char* where) {
  BasicTape<T> tape;
  const double v = static_cast<double>(f(tape, tape.leaf(x)).value().item());
  if (!std::isfinite(v)) {
    throw DomainError(std::string("gradient_check: non-finite value at ") + where + " for element " +
                      std::to_string(element));
  }
  return v;
}

}  // namespace

template <typename T>
GradientCheckResult gradient_check(const ScalarFn<T>& f, const BasicTensor<T>& x, GradientCheckOptions opts) {
  if (!(opts.step > 0.0)) throw DomainError("gradient_check: step must be positive");

  BasicTensor<T> analytic;
  {
    BasicTape<T> tape;
    auto in = tape.leaf(x);
    auto out = f(tape, in);
    tape.backward(out);
    analytic = in.grad();
  }

  GradientCheckResult res;
  const double h = opts.step;
  const double f0 = opts.skip_kinks ? evaluate(f, x, 0, "x") : 0.0;
  BasicTensor<T> probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T orig = probe[i];
    probe[i] = static_cast<T>(orig + h);
    const double fp = evaluate(f, probe, i, "x + h");
    probe[i] = static_cast<T>(orig - h);
    const double fm = evaluate(f, probe, i, "x - h");
    probe[i] = orig;

    const double numeric = (fp - fm) / (2.0 * h);
    if (opts.skip_kinks) {
      // One-sided slopes disagree at a kink; central slopes at h and h/2
      // disagree at a jump.
      probe[i] = static_cast<T>(orig + h / 2);
      const double fp2 = evaluate(f, probe, i, "x + h/2");
      probe[i] = static_cast<T>(orig - h / 2);
      const double fm2 = evaluate(f, probe, i, "x - h/2");
      probe[i] = orig;
      const double fwd = (fp - f0) / h, bwd = (f0 - fm) / h, half = (fp2 - fm2) / h;
      auto differ = [&](double a, double b) {
        return std::abs(a - b) > opts.kink_tolerance * std::max({std::abs(a), std::abs(b), 1e-8});
      };
      if (differ(fwd, bwd) || differ(numeric, half)) {
        ++res.skipped;
        continue;
      }
    }
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    ++res.checked;
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = i;
    }
  }
  return res;
}

template GradientCheckResult gradient_check<float>(const ScalarFn<float>&, const Tensor&, GradientCheckOptions);
template GradientCheckResult gradient_check<double>(const ScalarFn<double>&, const Tensor64&, GradientCheckOptions);

}  // namespace segadv
