#pragma once

#include <cstdint>
#include <vector>

#include "segadv/attack/attack_config.hpp"
#include "segadv/model/prob_map.hpp"
#include "segadv/model/seg_model.hpp"
#include "segadv/tensor/label_map.hpp"
#include "segadv/tensor/tape.hpp"
#include "segadv/uncertainty/measures.hpp"

namespace segadv {

// Per-pixel loss weights for a scheme, from probabilities p and ground truth:
//   plain          1
//   *_weighted     e^U with U in {E, 1 - M, 1 - D, 1 - Mbar}
//   zero_out       1 if argmax p == truth or max p < tau, else 0
std::vector<double> loss_weights(LossScheme scheme, const ProbMap& p, const LabelMap& truth, double tau);

// Mean over all pixels of weight * cross-entropy. Weights are computed from
// softmax(logits) unless `weights` is given, and enter the tape as constants.
template <typename T>
BasicVar<T> weighted_loss(BasicVar<T> logits, const LabelMap& truth, LossScheme scheme, double tau,
                          const std::vector<double>* weights = nullptr);

struct AttackResult {
  Tensor adversarial;
  Tensor perturbation;        // adversarial - clean
  std::vector<double> apsr_trace;  // APSR of every iterate, clean first
  ProbMap final_probs;
  std::vector<std::uint8_t> mask;  // attacked pixels (subset family), else empty
  int restart = 0;                 // restart that was kept
  double seconds = 0.0;
  AttackConfig config;

  double final_apsr() const { return apsr_trace.back(); }
};

// Every attack takes an `image_index` that, combined with the config seeds,
// selects the random start and the pixel subset for that image.
AttackResult fgsm(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& config,
                  std::uint64_t image_index = 0);
AttackResult ifgsm(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& config,
                   std::uint64_t image_index = 0);
AttackResult pgd(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& config,
                 std::uint64_t image_index = 0);
AttackResult subset_ifgsm(const SegModel& model, const Tensor& image, const LabelMap& truth,
                          const AttackConfig& config, std::uint64_t image_index = 0);
// Dispatches on config.family after validating config, model and inputs.
AttackResult run_attack(const SegModel& model, const Tensor& image, const LabelMap& truth, const AttackConfig& config,
                        std::uint64_t image_index = 0);

// floor(fraction * H * W) distinct pixels drawn by a partial Fisher-Yates
// shuffle; throws ConfigError if that is zero.
std::vector<std::uint8_t> subset_mask(std::size_t height, std::size_t width, double fraction, std::uint64_t seed);

// Checks that the model and config agree on the class count and that the
// image and labels fit the model.
void check_attack_inputs(const SegModel& model, const Tensor& image, const LabelMap& truth,
                         const AttackConfig& config);

}  // namespace segadv
