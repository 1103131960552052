#include "segadv/eval/metrics.hpp"

#include "segadv/error.hpp"

namespace segadv {

namespace {

void require_same_size(const LabelMap& a, const LabelMap& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError(std::string(what) + ": prediction " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " vs truth " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

}  // namespace

double apsr(const LabelMap& prediction, const LabelMap& truth) {
  require_same_size(prediction, truth, "apsr");
  if (truth.size() == 0) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += prediction.data[i] != truth.data[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

double apsr(const ProbMap& probs, const LabelMap& truth) { return apsr(probs.argmax(), truth); }

double pixel_accuracy(const LabelMap& prediction, const LabelMap& truth) { return 1.0 - apsr(prediction, truth); }

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {}

void ConfusionMatrix::add(const LabelMap& prediction, const LabelMap& truth) {
  require_same_size(prediction, truth, "confusion matrix");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = truth.data[i], p = prediction.data[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_ || static_cast<std::size_t>(p) >= n_) {
      throw DomainError("confusion matrix: label out of range for " + std::to_string(n_) + " classes");
    }
    ++counts_[static_cast<std::size_t>(t) * n_ + static_cast<std::size_t>(p)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw ShapeError("confusion matrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::true_positives(std::size_t c) const { return count(c, c); }

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < n_; ++t)
    if (t != c) s += count(t, c);
  return s;
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p)
    if (p != c) s += count(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

double ConfusionMatrix::miou() const {
  std::vector<std::uint64_t> tp(n_), fp(n_), fn(n_);
  for (std::size_t c = 0; c < n_; ++c) {
    tp[c] = true_positives(c);
    fp[c] = false_positives(c);
    fn[c] = false_negatives(c);
  }
  return miou_from_counts(tp, fp, fn);
}

double ConfusionMatrix::pixel_accuracy() const {
  const auto t = total();
  if (t == 0) return 0.0;
  std::uint64_t diag = 0;
  for (std::size_t c = 0; c < n_; ++c) diag += count(c, c);
  return static_cast<double>(diag) / static_cast<double>(t);
}

double miou_from_counts(std::span<const std::uint64_t> tp, std::span<const std::uint64_t> fp,
                        std::span<const std::uint64_t> fn) {
  if (tp.size() != fp.size() || tp.size() != fn.size()) throw ShapeError("miou: count vectors differ in length");
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < tp.size(); ++c) {
    const auto denom = tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    sum += static_cast<double>(tp[c]) / static_cast<double>(denom);
    ++present;
  }
  return present == 0 ? 0.0 : sum / static_cast<double>(present);
}

}  // namespace segadv
