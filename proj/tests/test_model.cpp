#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "segadv/error.hpp"
#include "segadv/model/checkpoint.hpp"
#include "segadv/model/seg_model.hpp"
#include "segadv/model/trainer.hpp"
#include "segadv/rng.hpp"
#include "segadv/tensor/gradient_check.hpp"
#include "segadv/tensor/ops.hpp"

using namespace segadv;

namespace {

ChannelStats test_norm() {
  ChannelStats s;
  s.mean = {120.0f, 110.0f, 100.0f};
  s.stddev = {50.0f, 45.0f, 55.0f};
  return s;
}

Tensor random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Tensor t({3, h, w});
  SplitMix64 rng(seed);
  for (auto& v : t.data()) v = static_cast<float>(std::round(rng.uniform() * 255.0));
  return t;
}

LabelMap random_labels(std::size_t h, std::size_t w, int classes, std::uint64_t seed) {
  LabelMap m(h, w);
  SplitMix64 rng(seed);
  for (auto& v : m.data) v = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(classes)));
  return m;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("segadv_test_" + name);
}

}  // namespace

TEST_CASE("output keeps spatial size and has one channel per class") {
  const auto model = SegModel::he_init(Architecture::default_fcn(5), test_norm(), 3);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{3, 3}, {7, 12}, {16, 5}}) {
    const auto p = predict(model, random_image(h, w, h * 31 + w));
    CHECK(p.num_classes() == 5);
    CHECK(p.height() == h);
    CHECK(p.width() == w);
  }
}

TEST_CASE("predict gives normalized probabilities and argmax/confidence agree") {
  const auto model = SegModel::he_init(Architecture::default_fcn(4), test_norm(), 11);
  const auto p = predict(model, random_image(9, 10, 5));
  const auto labels = p.argmax();
  const auto conf = p.confidence();
  for (std::size_t z = 0; z < p.pixels(); ++z) {
    double s = 0.0;
    float best = -1.0f;
    for (std::size_t c = 0; c < p.num_classes(); ++c) {
      s += p(c, z);
      best = std::max(best, p(c, z));
    }
    CHECK(std::abs(s - 1.0) <= 1e-6);
    CHECK(p(static_cast<std::size_t>(labels.data[z]), z) == best);
    CHECK(conf[z] == best);
  }
}

TEST_CASE("zero final layer gives uniform probabilities") {
  auto model = SegModel::he_init(Architecture::default_fcn(4), test_norm(), 2);
  auto& params = model.parameters();
  for (auto& v : params[params.size() - 2].data()) v = 0.0f;
  for (auto& v : params.back().data()) v = 0.0f;
  const auto p = predict(model, random_image(6, 6, 9));
  for (std::size_t z = 0; z < p.pixels(); ++z)
    for (std::size_t c = 0; c < 4; ++c) CHECK(p(c, z) == doctest::Approx(0.25).epsilon(1e-7));
}

TEST_CASE("predict rejects wrong channel count") {
  const auto model = SegModel::he_init(Architecture::default_fcn(3), test_norm(), 1);
  CHECK_THROWS_AS(predict(model, Tensor({1, 4, 4})), ShapeError);
  CHECK_THROWS_AS(predict(model, Tensor({4, 4})), ShapeError);
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS(SegModel(Architecture{3, {}}, test_norm()), ConfigError);
  CHECK_THROWS_AS(SegModel(Architecture{3, {{8, 2}, {3, 3}}}, test_norm()), ConfigError);
  CHECK_THROWS_AS(SegModel(Architecture{3, {{1, 3}}}, test_norm()), ConfigError);
  CHECK_THROWS_AS(SegModel(Architecture{1, {{2, 3}}}, test_norm()), ConfigError);
}

TEST_CASE("whole-model loss gradient w.r.t. the image matches finite differences") {
  const auto model = SegModel::he_init(Architecture::default_fcn(4), test_norm(), 21);
  const auto labels = random_labels(8, 8, 4, 4);
  ScalarFn<double> f = [&](Tape64&, Var64 x) {
    return ops::mean(ops::pixel_cross_entropy(model.logits<double>(x), labels));
  };
  const auto x = random_image(8, 8, 17).cast<double>();
  const auto r = gradient_check(f, x, {.step = 1e-3, .skip_kinks = true});
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.skipped * 20 < r.checked);
}

TEST_CASE("whole-model loss gradient w.r.t. a weight tensor matches finite differences") {
  const auto model = SegModel::he_init(Architecture{3, {{4, 3}, {3, 3}}}, test_norm(), 5);
  const auto image = random_image(6, 6, 8).cast<double>();
  const auto labels = random_labels(6, 6, 3, 9);
  for (std::size_t which : {0u, 1u, 2u, 3u}) {
    CAPTURE(which);
    ScalarFn<double> f = [&](Tape64& tape, Var64 w) {
      auto params = model.bind(tape, false);
      params[which] = w;
      auto logits = model.forward<double>(tape.constant(image), params);
      return ops::mean(ops::pixel_cross_entropy(logits, labels));
    };
    const auto r = gradient_check(f, model.parameters()[which].cast<double>(), {.step = 1e-4, .skip_kinks = true});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("input gradient depends on the normalization constants") {
  auto a = SegModel::he_init(Architecture::default_fcn(3), test_norm(), 4);
  ChannelStats other = test_norm();
  other.stddev = {30.0f, 30.0f, 30.0f};
  SegModel b(a.architecture(), other);
  b.parameters() = a.parameters();

  const auto image = random_image(8, 8, 1);
  const auto labels = random_labels(8, 8, 3, 2);
  auto input_grad = [&](const SegModel& m) {
    Tape tape;
    auto x = tape.leaf(image);
    auto loss = ops::mean(ops::pixel_cross_entropy(m.logits<float>(x), labels));
    tape.backward(loss);
    return x.grad();
  };
  CHECK_FALSE(input_grad(a) == input_grad(b));
}

TEST_CASE("one SGD step on a single pixel decreases its cross-entropy") {
  auto model = SegModel::he_init(Architecture{3, {{4, 3}, {2, 3}}}, test_norm(), 12);
  LabeledImage sample{"px", random_image(1, 1, 3), LabelMap(1, 1, 1)};
  const double before = image_loss_and_grad(model, sample, nullptr);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 1;
  cfg.lr = 1e-3;
  const auto result = train(model, {sample}, cfg);
  REQUIRE(result.step_losses.size() == 1);
  CHECK(result.step_losses[0] == doctest::Approx(before));
  CHECK(image_loss_and_grad(model, sample, nullptr) < before);
}

TEST_CASE("training is deterministic for a fixed seed and reduces loss") {
  std::vector<LabeledImage> data;
  for (int i = 0; i < 6; ++i) {
    Tensor img({3, 8, 8}, 40.0f);
    LabelMap lbl(8, 8);
    for (std::size_t y = 2; y < 6; ++y)
      for (std::size_t x = 1 + static_cast<std::size_t>(i % 3); x < 5 + static_cast<std::size_t>(i % 3); ++x) {
        img.at(0, y, x) = 220.0f;
        lbl.data[y * 8 + x] = 1;
      }
    data.push_back({"s" + std::to_string(i), img, lbl});
  }
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 4;
  cfg.lr = 1e-2;
  cfg.seed = 99;
  const auto init = SegModel::he_init(Architecture{3, {{8, 3}, {2, 3}}}, test_norm(), 1);
  auto m1 = init;
  auto m2 = init;
  const auto r1 = train(m1, data, cfg);
  const auto r2 = train(m2, data, cfg);
  CHECK(m1.parameters() == m2.parameters());
  CHECK(r1.step_losses == r2.step_losses);
  CHECK(r1.epoch_losses.back() < r1.epoch_losses.front());

  cfg.seed = 100;
  auto m3 = init;
  train(m3, data, cfg);
  CHECK_FALSE(m3.parameters() == m1.parameters());
}

TEST_CASE("training aborts on divergence and rejects bad config") {
  auto model = SegModel::he_init(Architecture{3, {{2, 3}}}, test_norm(), 12);
  LabeledImage sample{"px", random_image(4, 4, 3), LabelMap(4, 4, 1)};
  TrainConfig cfg;
  auto poisoned = model;
  poisoned.parameters()[0][0] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_WITH_AS(train(poisoned, {sample}, cfg), doctest::Contains("epoch 0"), DivergenceError);
  cfg.lr = 0.0;
  CHECK_THROWS_AS(train(model, {sample}, cfg), ConfigError);
  cfg.lr = 1e-3;
  CHECK_THROWS_AS(train(model, {}, cfg), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_config(KvConfig::parse("epochs=3\nlearning_rate=1")), ConfigError);
  const auto parsed = TrainConfig::from_config(KvConfig::parse("epochs=3\nlr=0.5\nbatch_size=2\nseed=4"));
  CHECK(parsed.epochs == 3);
  CHECK(parsed.lr == 0.5);
  CHECK(parsed.batch_size == 2);
  CHECK(parsed.seed == 4);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto model = SegModel::he_init(Architecture::default_fcn(4), test_norm(), 77);
  const TrainingMetadata meta{30, 0.125f, 0xdeadbeefcafeULL};
  const auto path = temp_path("roundtrip.ckpt");
  save_checkpoint(path, model, meta);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.meta == meta);
  CHECK(loaded.model.architecture() == model.architecture());
  CHECK(loaded.model.parameters() == model.parameters());
  const auto image = random_image(12, 12, 4);
  CHECK(predict(loaded.model, image).tensor() == predict(model, image).tensor());
  CHECK(checkpoint_hash(path).size() == 16);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint decoding rejects bad input") {
  const auto model = SegModel::he_init(Architecture{3, {{4, 3}, {2, 3}}}, test_norm(), 7);
  const auto bytes = encode_checkpoint(model, {});

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad_magic), doctest::Contains("magic"), ParseError);

  auto bad_version = bytes;
  bad_version[8] = 2;
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad_version), doctest::Contains("version"), ParseError);

  // Cut inside the last tensor (conv1.bias: 2 floats).
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_WITH_AS(decode_checkpoint(truncated), doctest::Contains("conv1.bias"), ParseError);

  auto cut_early = bytes;
  cut_early.resize(bytes.size() - 2 * 4 - 4 - 4 - 10 - 4 - 2 * 3 * 3 * 4 * 4);
  CHECK_THROWS_WITH_AS(decode_checkpoint(cut_early), doctest::Contains("conv1.weight"), ParseError);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), ParseError);

  CHECK_THROWS_AS(decode_checkpoint({}), ParseError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ULL);
  const std::uint8_t a[] = {'a'};
  CHECK(fnv1a64(a, 1) == 0xaf63dc4c8601ec8cULL);
  const std::string foobar = "foobar";
  CHECK(fnv1a64(reinterpret_cast<const std::uint8_t*>(foobar.data()), foobar.size()) == 0x85944171f73967e8ULL);
}
