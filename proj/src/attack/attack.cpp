#include "segadv/attack/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "segadv/error.hpp"
#include "segadv/eval/metrics.hpp"
#include "segadv/rng.hpp"
#include "segadv/tensor/ops.hpp"

namespace segadv {

namespace {

Measure scheme_measure(LossScheme s) {
  switch (s) {
    case LossScheme::entropy_weighted: return Measure::entropy;
    case LossScheme::margin_weighted: return Measure::margin;
    case LossScheme::maxmin_weighted: return Measure::max_min;
    case LossScheme::meanmargin_weighted: return Measure::mean_margin;
    default: break;
  }
  throw UsageError("loss scheme " + to_string(s) + " has no uncertainty measure");
}

using Clock = std::chrono::steady_clock;

struct Iterated {
  Tensor x;
  std::vector<double> trace;
  ProbMap probs;
};

Iterated iterate(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& cfg,
                 Tensor x, const std::vector<std::uint8_t>* mask, const std::vector<double>* frozen) {
  const int n = cfg.resolved_iterations();
  const double step = cfg.step_size();
  const double eps = cfg.epsilon;
  const std::size_t hw = truth.size();

  Iterated out;
  std::vector<double> weights;
  for (int t = 0; t < n; ++t) {
    Tape tape;
    auto xv = tape.leaf(x);
    auto logits = model.logits<float>(xv);
    const ProbMap probs(ops::softmax_channels(logits).value());
    out.trace.push_back(apsr(probs, truth));

    const std::vector<double>* w = frozen;
    if (!w && cfg.loss != LossScheme::plain) {
      weights = loss_weights(cfg.loss, probs, truth, cfg.tau);
      w = &weights;
    }
    auto loss = weighted_loss(logits, truth, cfg.loss, cfg.tau, w);
    tape.backward(loss);
    const Tensor grad = xv.grad();

    for (std::size_t i = 0; i < x.numel(); ++i) {
      const float g = grad[i];
      if (g == 0.0f || (mask && !(*mask)[i % hw])) continue;
      const double lo = std::max(0.0, static_cast<double>(image[i]) - eps);
      const double hi = std::min(255.0, static_cast<double>(image[i]) + eps);
      const double v = static_cast<double>(x[i]) + (g > 0.0f ? step : -step);
      x[i] = static_cast<float>(std::clamp(v, lo, hi));
    }
  }
  out.probs = predict(model, x);
  out.trace.push_back(apsr(out.probs, truth));
  out.x = std::move(x);
  return out;
}

std::vector<double> clean_weights(const SegModel& model, const Tensor& image, const LabelMap& truth,
                                  const AttackConfig& cfg) {
  return loss_weights(cfg.loss, predict(model, image), truth, cfg.tau);
}

AttackResult finish(Iterated it, const Tensor& image, const AttackConfig& cfg, Clock::time_point start) {
  AttackResult r;
  r.perturbation = Tensor(image.shape());
  for (std::size_t i = 0; i < image.numel(); ++i) r.perturbation[i] = it.x[i] - image[i];
  r.adversarial = std::move(it.x);
  r.apsr_trace = std::move(it.trace);
  r.final_probs = std::move(it.probs);
  r.config = cfg;
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

AttackResult single_start(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& cfg,
                          const std::vector<std::uint8_t>* mask) {
  const auto start = Clock::now();
  std::vector<double> frozen;
  if (cfg.weights == WeightsPolicy::frozen_clean && cfg.loss != LossScheme::plain)
    frozen = clean_weights(model, image, truth, cfg);
  auto it = iterate(model, image, truth, cfg, image, mask, frozen.empty() ? nullptr : &frozen);
  return finish(std::move(it), image, cfg, start);
}

}  // namespace

std::vector<double> loss_weights(LossScheme scheme, const ProbMap& p, const LabelMap& truth, double tau) {
  if (truth.height != p.height() || truth.width != p.width())
    throw ShapeError("loss_weights: label map does not match probabilities");
  if (scheme == LossScheme::plain) return std::vector<double>(p.pixels(), 1.0);
  if (scheme == LossScheme::zero_out) {
    std::vector<double> w(p.pixels());
    for (std::size_t z = 0; z < w.size(); ++z) {
      const std::size_t top = p.argmax(z);
      const bool correct = static_cast<std::int32_t>(top) == truth.data[z];
      w[z] = (correct || static_cast<double>(p(top, z)) < tau) ? 1.0 : 0.0;
    }
    return w;
  }
  return weight_map(compute_measure(scheme_measure(scheme), p));
}

template <typename T>
BasicVar<T> weighted_loss(BasicVar<T> logits, const LabelMap& truth, LossScheme scheme, double tau,
                          const std::vector<double>* weights) {
  auto ce = ops::pixel_cross_entropy(logits, truth);
  if (scheme == LossScheme::plain) return ops::mean(ce);

  std::vector<double> computed;
  if (!weights) {
    const ProbMap p(ops::softmax_channels(logits).value().template cast<float>());
    computed = loss_weights(scheme, p, truth, tau);
    weights = &computed;
  }
  if (weights->size() != truth.size())
    throw ShapeError("weighted_loss: " + std::to_string(weights->size()) + " weights for " +
                     std::to_string(truth.size()) + " pixels");
  BasicTensor<T> w(Shape{truth.height, truth.width});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>((*weights)[i]);
  return ops::mean(ops::mul(ce, logits.tape().constant(std::move(w))));
}

template BasicVar<float> weighted_loss(BasicVar<float>, const LabelMap&, LossScheme, double, const std::vector<double>*);
template BasicVar<double> weighted_loss(BasicVar<double>, const LabelMap&, LossScheme, double,
                                        const std::vector<double>*);

std::vector<std::uint8_t> subset_mask(std::size_t height, std::size_t width, double fraction, std::uint64_t seed) {
  const std::size_t total = height * width;
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total)));
  if (count < 1)
    throw ConfigError("subset attack: fraction " + format_double(fraction) + " of " + std::to_string(total) +
                      " pixels selects none");
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::uint8_t> mask(total, 0);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + rng.below(total - i)]);
    mask[order[i]] = 1;
  }
  return mask;
}

void check_attack_inputs(const SegModel& model, const Tensor& image, const LabelMap& truth,
                         const AttackConfig& config) {
  config.validate();
  const std::size_t c = model.num_classes();
  if (config.num_classes != 0 && config.num_classes != c)
    throw ConfigError("attack '" + config.name + "' expects " + std::to_string(config.num_classes) +
                      " classes but the model has " + std::to_string(c));
  if (image.rank() != 3 || image.dim(0) != 3)
    throw ShapeError("attack: expected a (3, H, W) image, got " + shape_str(image.shape()));
  if (truth.height != image.dim(1) || truth.width != image.dim(2))
    throw ShapeError("attack: labels are " + std::to_string(truth.height) + "x" + std::to_string(truth.width) +
                     ", image is " + shape_str(image.shape()));
  for (auto l : truth.data)
    if (l < 0 || static_cast<std::size_t>(l) >= c)
      throw DomainError("attack: label " + std::to_string(l) + " outside [0, " + std::to_string(c) + ")");
  for (float v : image.data())
    if (!(v >= 0.0f && v <= 255.0f)) throw DomainError("attack: image values must lie in [0, 255]");
}

AttackResult fgsm(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& config,
                  std::uint64_t) {
  AttackConfig cfg = config;
  cfg.family = AttackFamily::fgsm;
  check_attack_inputs(model, image, truth, cfg);
  return single_start(model, image, truth, cfg, nullptr);
}

AttackResult ifgsm(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& config,
                   std::uint64_t) {
  AttackConfig cfg = config;
  cfg.family = AttackFamily::ifgsm;
  check_attack_inputs(model, image, truth, cfg);
  return single_start(model, image, truth, cfg, nullptr);
}

AttackResult subset_ifgsm(const SegModel& model, const Tensor& image, const LabelMap& truth,
                          const AttackConfig& config, std::uint64_t image_index) {
  AttackConfig cfg = config;
  cfg.family = AttackFamily::subset_ifgsm;
  check_attack_inputs(model, image, truth, cfg);
  auto mask = subset_mask(truth.height, truth.width, cfg.subset_fraction,
                          derive_seed(cfg.mask_seed, image_index, 0x3a5c));
  auto r = single_start(model, image, truth, cfg, &mask);
  r.mask = std::move(mask);
  return r;
}

AttackResult pgd(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& config,
                 std::uint64_t image_index) {
  AttackConfig cfg = config;
  cfg.family = AttackFamily::pgd;
  check_attack_inputs(model, image, truth, cfg);
  const auto start = Clock::now();

  std::vector<double> frozen;
  if (cfg.weights == WeightsPolicy::frozen_clean && cfg.loss != LossScheme::plain)
    frozen = clean_weights(model, image, truth, cfg);

  Iterated best;
  int best_restart = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    SplitMix64 rng(derive_seed(cfg.seed, image_index, static_cast<std::uint64_t>(r)));
    Tensor x0(image.shape());
    for (std::size_t i = 0; i < x0.numel(); ++i) {
      const double u = rng.uniform(-cfg.epsilon, cfg.epsilon);
      x0[i] = static_cast<float>(std::clamp(static_cast<double>(image[i]) + u, 0.0, 255.0));
    }
    auto it = iterate(model, image, truth, cfg, std::move(x0), nullptr, frozen.empty() ? nullptr : &frozen);
    if (best_restart < 0 || it.trace.back() > best.trace.back()) {
      best = std::move(it);
      best_restart = r;
    }
  }
  auto result = finish(std::move(best), image, cfg, start);
  result.restart = best_restart;
  return result;
}

AttackResult run_attack(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& config,
                        std::uint64_t image_index) {
  switch (config.family) {
    case AttackFamily::fgsm: return fgsm(model, image, truth, config, image_index);
    case AttackFamily::ifgsm: return ifgsm(model, image, truth, config, image_index);
    case AttackFamily::pgd: return pgd(model, image, truth, config, image_index);
    case AttackFamily::subset_ifgsm: return subset_ifgsm(model, image, truth, config, image_index);
  }
  throw UsageError("run_attack: unknown family");
}

}  // namespace segadv
