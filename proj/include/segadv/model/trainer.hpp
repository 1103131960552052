#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "segadv/data/shapes.hpp"
#include "segadv/error.hpp"
#include "segadv/kv_config.hpp"
#include "segadv/model/seg_model.hpp"

namespace segadv {

// Mini-batch SGD with momentum on mean per-pixel cross-entropy:
//   v <- momentum * v + grad,  w <- w - lr * v
// Batches are contiguous slices of a per-epoch shuffle drawn from `seed`.
struct TrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;

  void validate() const;
  static TrainConfig from_config(const KvConfig& cfg);
  KvConfig to_config() const;
};

struct TrainResult {
  std::vector<double> step_losses;   // mean batch loss before each update
  std::vector<double> epoch_losses;  // mean of step losses per epoch
  double final_loss() const { return epoch_losses.empty() ? 0.0 : epoch_losses.back(); }
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Called after every epoch with (epoch index, mean epoch loss).
using EpochCallback = std::function<void(int, double)>;

// Deterministic given the model's initial parameters, data and config.
// Throws DivergenceError if a loss becomes non-finite.
TrainResult train(SegModel& model, const std::vector<LabeledImage>& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Mean per-pixel cross-entropy of one image and its parameter gradients.
double image_loss_and_grad(const SegModel& model, const LabeledImage& sample, std::vector<Tensor>* grads);

}  // namespace segadv
