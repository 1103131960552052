#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "segadv/model/prob_map.hpp"
#include "segadv/tensor/label_map.hpp"

namespace segadv {

// Fraction of pixels whose prediction differs from the ground truth.
double apsr(const LabelMap& prediction, const LabelMap& truth);
double apsr(const ProbMap& probs, const LabelMap& truth);
double pixel_accuracy(const LabelMap& prediction, const LabelMap& truth);

// Global confusion matrix, counts[truth][pred].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(const LabelMap& prediction, const LabelMap& truth);
  void merge(const ConfusionMatrix& other);

  std::size_t num_classes() const { return n_; }
  std::uint64_t count(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }
  std::uint64_t true_positives(std::size_t c) const;
  std::uint64_t false_positives(std::size_t c) const;
  std::uint64_t false_negatives(std::size_t c) const;
  std::uint64_t total() const;

  // Mean IoU over classes that occur in truth or prediction.
  double miou() const;
  double pixel_accuracy() const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

// IoU_c = TP / (TP + FP + FN) averaged over classes with a nonzero denominator.
double miou_from_counts(std::span<const std::uint64_t> tp, std::span<const std::uint64_t> fp,
                        std::span<const std::uint64_t> fn);

inline double delta_miou(double clean, double perturbed) { return clean - perturbed; }

}  // namespace segadv
