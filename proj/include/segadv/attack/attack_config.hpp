#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segadv/kv_config.hpp"

namespace segadv {

enum class AttackFamily { fgsm, ifgsm, pgd, subset_ifgsm };

enum class LossScheme {
  plain,
  entropy_weighted,
  margin_weighted,
  maxmin_weighted,
  meanmargin_weighted,
  zero_out,
};

// Where per-pixel weights come from: the current iterate, or the clean
// image once before the first step.
enum class WeightsPolicy { per_iteration, frozen_clean };

std::string to_string(AttackFamily f);
std::string to_string(LossScheme s);
std::string to_string(WeightsPolicy p);
AttackFamily parse_family(const std::string& s);
LossScheme parse_loss_scheme(const std::string& s);
WeightsPolicy parse_weights_policy(const std::string& s);

// n = max(1, floor(min(eps + 4, 1.25 eps)))
int scheduled_iterations(double epsilon);

// All magnitudes are in pixel units on the [0, 255] scale.
struct AttackConfig {
  std::string name;
  AttackFamily family = AttackFamily::ifgsm;
  double epsilon = 8.0;
  double alpha = 1.0;
  int iterations = 0;  // 0: use the schedule (fgsm always runs one step)
  int restarts = 1;
  LossScheme loss = LossScheme::plain;
  double tau = 0.75;
  double subset_fraction = 1.0;
  std::uint64_t mask_seed = 0;
  std::uint64_t seed = 0;
  WeightsPolicy weights = WeightsPolicy::per_iteration;
  std::size_t num_classes = 0;  // 0: accept any model

  void validate() const;
  int resolved_iterations() const;
  double step_size() const { return family == AttackFamily::fgsm ? epsilon : alpha; }

  // Keys: preset, name, family, epsilon, alpha, iterations, restarts, loss,
  // tau, subset_fraction, mask_seed, seed, weights, num_classes. A preset is
  // applied first and the other keys override it.
  static AttackConfig from_config(const KvConfig& cfg);
  KvConfig to_config() const;
  // One line, `key=value` pairs joined by ';'.
  std::string summary() const;

  // fgsm, ifgsm, pgd (eps 8, alpha 1, 40 steps, 1 restart), subset_ifgsm,
  // pgd_fine_255 (alpha 1/30, eps 1) and pgd_fine_unit (the same on a
  // [0, 1] scale, i.e. alpha 8.5, eps 255).
  static AttackConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

std::string format_double(double v);

}  // namespace segadv
