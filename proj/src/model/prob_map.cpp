#include "segadv/model/prob_map.hpp"

#include "segadv/error.hpp"

namespace segadv {

ProbMap::ProbMap(Tensor probs) : probs_(std::move(probs)) {
  if (probs_.rank() != 3 || probs_.dim(0) == 0) {
    throw ShapeError("ProbMap: expected (C, H, W) with C >= 1, got " + shape_str(probs_.shape()));
  }
}

std::size_t ProbMap::argmax(std::size_t pixel) const {
  std::size_t best = 0;
  for (std::size_t c = 1; c < num_classes(); ++c)
    if ((*this)(c, pixel) > (*this)(best, pixel)) best = c;
  return best;
}

LabelMap ProbMap::argmax() const {
  LabelMap out(height(), width());
  for (std::size_t p = 0; p < pixels(); ++p) out.data[p] = static_cast<std::int32_t>(argmax(p));
  return out;
}

std::vector<float> ProbMap::confidence() const {
  std::vector<float> out(pixels());
  for (std::size_t p = 0; p < pixels(); ++p) out[p] = (*this)(argmax(p), p);
  return out;
}

}  // namespace segadv
