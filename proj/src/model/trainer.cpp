#include "segadv/model/trainer.hpp"

#include <cmath>
#include <numeric>

#include "segadv/rng.hpp"
#include "segadv/tensor/ops.hpp"

namespace segadv {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

TrainConfig TrainConfig::from_config(const KvConfig& cfg) {
  cfg.check_keys({"epochs", "lr", "momentum", "batch_size", "seed"}, "train config");
  TrainConfig c;
  c.epochs = static_cast<int>(cfg.get_int("epochs", c.epochs));
  c.lr = cfg.get_double("lr", c.lr);
  c.momentum = cfg.get_double("momentum", c.momentum);
  c.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", static_cast<std::int64_t>(c.batch_size)));
  c.seed = cfg.get_u64("seed", c.seed);
  c.validate();
  return c;
}

KvConfig TrainConfig::to_config() const {
  KvConfig k;
  k.set("epochs", std::to_string(epochs));
  k.set("lr", std::to_string(lr));
  k.set("momentum", std::to_string(momentum));
  k.set("batch_size", std::to_string(batch_size));
  k.set("seed", std::to_string(seed));
  return k;
}

double image_loss_and_grad(const SegModel& model, const LabeledImage& sample, std::vector<Tensor>* grads) {
  Tape tape;
  const auto params = model.bind(tape, grads != nullptr);
  auto logits = model.forward<float>(tape.constant(sample.image), params);
  auto loss = ops::mean(ops::pixel_cross_entropy(logits, sample.labels));
  if (grads) {
    tape.backward(loss);
    grads->clear();
    for (const auto& p : params) grads->push_back(p.grad());
  }
  return loss.value().item();
}

TrainResult train(SegModel& model, const std::vector<LabeledImage>& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (data.empty()) throw ConfigError("train: empty training set");

  auto& params = model.parameters();
  std::vector<std::vector<double>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.numel(), 0.0);

  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::vector<Tensor> grads;
  std::vector<std::vector<double>> batch_grad(params.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(derive_seed(config.seed, 0x5eed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = 0; k < params.size(); ++k) batch_grad[k].assign(params[k].numel(), 0.0);

      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        batch_loss += image_loss_and_grad(model, data[order[b]], &grads);
        for (std::size_t k = 0; k < params.size(); ++k)
          for (std::size_t i = 0; i < grads[k].numel(); ++i) batch_grad[k][i] += grads[k][i];
      }
      batch_loss *= inv;
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("train: loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(steps) + " (lr " + std::to_string(config.lr) + ")");
      }

      for (std::size_t k = 0; k < params.size(); ++k) {
        auto& v = velocity[k];
        auto w = params[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = config.momentum * v[i] + batch_grad[k][i] * inv;
          w[i] = static_cast<float>(static_cast<double>(w[i]) - config.lr * v[i]);
        }
      }
      result.step_losses.push_back(batch_loss);
      epoch_sum += batch_loss;
      ++steps;
    }
    result.epoch_losses.push_back(epoch_sum / static_cast<double>(steps));
    if (on_epoch) on_epoch(epoch, result.epoch_losses.back());
  }
  return result;
}

}  // namespace segadv
