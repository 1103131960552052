#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "segadv/data/manifest.hpp"
#include "segadv/error.hpp"
#include "segadv/eval/csv.hpp"
#include "segadv/eval/experiment.hpp"
#include "segadv/eval/overlay.hpp"
#include "segadv/model/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace segadv;

namespace {

LabelMap labels_from(std::size_t h, std::size_t w, std::vector<std::int32_t> v) {
  LabelMap m(h, w);
  m.data = std::move(v);
  return m;
}

struct Fixture {
  fs::path dir;
  std::string manifest;
  std::string checkpoint;

  explicit Fixture(const std::string& name, int classes = 3) {
    dir = fs::temp_directory_path() / ("segadv_eval_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    DatasetSpec spec;
    spec.num_classes = classes;
    spec.height = 16;
    spec.width = 16;
    spec.train_size = 1;
    spec.val_size = 6;
    const auto ds = generate(spec);
    const auto stats = channel_stats(ds.val);
    manifest = write_split(dir.string(), "val", ds.val, classes, stats);
    const auto model = SegModel::he_init(Architecture{3, {{6, 3}, {static_cast<std::size_t>(classes), 3}}}, stats, 3);
    checkpoint = (dir / "model.ckpt").string();
    save_checkpoint(checkpoint, model, {});
  }
  ~Fixture() { fs::remove_all(dir); }
};

std::string strip_timing(const std::string& path) {
  auto t = read_csv(path);
  std::string out;
  for (auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      if (t.header[c] != "seconds" && t.header[c] != "mean_seconds") out += row[c] + ",";
    out += "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("apsr counting") {
  const LabelMap truth(64, 64, 1);
  CHECK(apsr(truth, truth) == 0.0);
  CHECK(apsr(LabelMap(64, 64, 2), truth) == 1.0);
  LabelMap pred = truth;
  for (std::size_t i = 0; i < 1024; ++i) pred.data[i * 4] = 0;
  CHECK(apsr(pred, truth) == 0.25);
  CHECK(pixel_accuracy(pred, truth) == 0.75);
  CHECK_THROWS_AS(apsr(LabelMap(2, 3), LabelMap(3, 2)), ShapeError);
}

TEST_CASE("mIoU from the toy confusion counts") {
  const std::vector<std::uint64_t> tp{10, 20, 30}, fp{5, 0, 10}, fn{5, 10, 0};
  const double expected = (10.0 / 20.0 + 20.0 / 30.0 + 30.0 / 40.0) / 3.0;
  CHECK(miou_from_counts(tp, fp, fn) == doctest::Approx(expected));
  CHECK(std::abs(miou_from_counts(tp, fp, fn) - 0.6389) < 1e-4);
}

TEST_CASE("mIoU identity, inversion and absent classes") {
  const auto truth = labels_from(2, 2, {0, 1, 1, 0});
  ConfusionMatrix same(2);
  same.add(truth, truth);
  CHECK(same.miou() == 1.0);
  CHECK(delta_miou(same.miou(), same.miou()) == 0.0);

  ConfusionMatrix inverted(2);
  inverted.add(labels_from(2, 2, {1, 0, 0, 1}), truth);
  CHECK(inverted.miou() == 0.0);

  // Classes 2 and 3 never appear: excluded rather than counted as zero.
  ConfusionMatrix sparse(4);
  sparse.add(truth, truth);
  CHECK(sparse.miou() == 1.0);

  // Hand-built matrix matches the count formula.
  ConfusionMatrix cm(3);
  cm.add(labels_from(1, 6, {0, 0, 1, 2, 2, 1}), labels_from(1, 6, {0, 1, 1, 2, 0, 1}));
  CHECK(cm.true_positives(1) == 2);
  CHECK(cm.false_negatives(1) == 1);
  CHECK(cm.false_positives(0) == 1);
  CHECK(cm.miou() == doctest::Approx((1.0 / 3.0 + 2.0 / 3.0 + 1.0 / 2.0) / 3.0));
  CHECK_THROWS_AS(cm.add(LabelMap(1, 1, 5), LabelMap(1, 1, 0)), DomainError);
}

TEST_CASE("csv escaping round trips") {
  const auto path = (fs::temp_directory_path() / "segadv_csv_test.csv").string();
  {
    CsvWriter w(path, {"a", "b"});
    w.row({"plain", "x,y"});
    w.row({"say \"hi\"", ""});
  }
  const auto t = read_csv(path);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[1][0] == "say \"hi\"");
  CHECK(t.rows[1][1] == "");
  CHECK(t.column("b") == 1);
  fs::remove(path);
}

TEST_CASE("overlays use the fixed palette") {
  const auto r = colorize_labels(labels_from(1, 2, {0, 3}));
  CHECK(r.pixels == std::vector<std::uint8_t>{0, 0, 0, 0, 130, 200});
  Tensor d({3, 1, 2});
  d[0] = 8.0f;
  d[2 + 1] = -4.0f;
  const auto h = perturbation_heatmap(d, 8.0);
  CHECK(h.pixels[0] == 255);
  CHECK(h.pixels[1] == 255);
  CHECK(h.pixels[3] == 255);
  CHECK(h.pixels[4] == 0);
}

TEST_CASE("experiment output: provenance, consistency and determinism") {
  Fixture fx("experiment");
  const auto spec = ExperimentSpec::from_sections(parse_sections(
      "overlays = 1\n[plain]\nepsilon = 4\n[zero]\nepsilon = 4\nloss = zero_out\n[pgd]\npreset = pgd\niterations = 3\n"));
  const auto inputs = EvalInputs::load(fx.checkpoint, fx.manifest);
  const auto out1 = (fx.dir / "run1").string(), out2 = (fx.dir / "run2").string();
  const auto report = run_experiment(inputs, spec, out1, {1, std::nullopt});
  run_experiment(inputs, spec, out2, {3, std::nullopt});

  CHECK(strip_timing(out1 + "/per_image.csv") == strip_timing(out2 + "/per_image.csv"));
  CHECK(strip_timing(out1 + "/summary.csv") == strip_timing(out2 + "/summary.csv"));

  const auto per = read_csv(out1 + "/per_image.csv");
  const auto sum = read_csv(out1 + "/summary.csv");
  REQUIRE(sum.rows.size() == 3);
  CHECK(per.rows.size() == 18);
  const auto hash = checkpoint_hash(fx.checkpoint);
  for (const auto& row : per.rows) {
    CHECK(row[per.column("checkpoint")] == hash);
    CHECK(row[per.column("config")].find("family=") != std::string::npos);
  }
  for (const auto& srow : sum.rows) {
    double apsr_sum = 0.0, sec_sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : per.rows) {
      if (row[0] != srow[0]) continue;
      apsr_sum += std::stod(row[per.column("adv_apsr")]);
      sec_sum += std::stod(row[per.column("seconds")]);
      ++n;
    }
    CHECK(n == 6);
    CHECK(std::stod(srow[sum.column("mean_apsr")]) == doctest::Approx(apsr_sum / 6.0).epsilon(1e-12));
    CHECK(std::stod(srow[sum.column("mean_seconds")]) == doctest::Approx(sec_sum / 6.0).epsilon(1e-9));
    const double clean = std::stod(srow[sum.column("clean_miou")]);
    CHECK(std::stod(srow[sum.column("delta_miou")]) <= clean);
  }
  for (const auto& r : report.runs) {
    CHECK(r.summary.mean_apsr >= 0.0);
    CHECK(r.summary.mean_apsr <= 1.0);
  }
  CHECK(fs::exists(out1 + "/overlays/zero/val_00000_adv_pred.ppm"));
  CHECK(fs::exists(out1 + "/overlays/zero/val_00000_perturbation.ppm"));
  CHECK_FALSE(fs::exists(out1 + "/overlays/zero/val_00001_adv_pred.ppm"));
}

TEST_CASE("clean APSR equals one minus pixel accuracy") {
  Fixture fx("identity");
  const auto inputs = EvalInputs::load(fx.checkpoint, fx.manifest);
  for (const auto& img : inputs.images) {
    const auto pred = predict(inputs.model, img.image).argmax();
    ConfusionMatrix cm(inputs.model.num_classes());
    cm.add(pred, img.labels);
    CHECK(apsr(pred, img.labels) == doctest::Approx(1.0 - cm.pixel_accuracy()).epsilon(1e-15));
  }
}

TEST_CASE("bad inputs fail before any attack runs") {
  Fixture fx("failfast");
  CHECK_THROWS(EvalInputs::load(fx.checkpoint, (fx.dir / "missing.manifest").string()));
  CHECK_THROWS(EvalInputs::load((fx.dir / "missing.ckpt").string(), fx.manifest));
  Fixture other("failfast4", 4);
  CHECK_THROWS_AS(EvalInputs::load(fx.checkpoint, other.manifest), ConfigError);

  const auto inputs = EvalInputs::load(fx.checkpoint, fx.manifest);
  const auto bad = ExperimentSpec::from_sections(parse_sections("[a]\nepsilon = 2\n[b]\nnum_classes = 5\n"));
  const auto out = (fx.dir / "bad").string();
  CHECK_THROWS_AS(run_experiment(inputs, bad, out), ConfigError);
  CHECK_FALSE(fs::exists(out + "/per_image.csv"));

  CHECK_THROWS_AS(ExperimentSpec::from_sections(parse_sections("limit = 3\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentSpec::from_sections(parse_sections("[a]\n[x]\nname = a\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentSpec::from_sections(parse_sections("[a]\nbogus = 1\n")), ConfigError);
}

TEST_CASE("measure comparison emits five rows per attack") {
  Fixture fx("measures");
  const auto inputs = EvalInputs::load(fx.checkpoint, fx.manifest);
  AttackConfig a;
  a.name = "i4";
  a.epsilon = 4;
  AttackConfig b = AttackConfig::preset("fgsm");
  const auto cmp = measure_comparison(inputs, {a, b}, (fx.dir / "cmp").string());
  REQUIRE(cmp.rows.size() == 10);
  CHECK(cmp.checks.size() == 2);
  const char* names[] = {"plain", "E", "M", "D", "Mbar"};
  for (std::size_t i = 0; i < 10; ++i) CHECK(cmp.rows[i].measure == names[i % 5]);
  const auto csv = read_csv((fx.dir / "cmp" / "measures.csv").string());
  CHECK(csv.rows.size() == 10);
  const auto checks = read_csv((fx.dir / "cmp" / "soft_checks.csv").string());
  CHECK(checks.rows.size() == 2);
}

TEST_CASE("two classes: M, D and Mbar rows coincide") {
  Fixture fx("twoclass", 2);
  const auto inputs = EvalInputs::load(fx.checkpoint, fx.manifest);
  AttackConfig a;
  a.epsilon = 8;
  const auto cmp = measure_comparison(inputs, {a}, "");
  REQUIRE(cmp.rows.size() == 5);
  const auto& m = cmp.rows[2].summary;
  for (std::size_t i : {3u, 4u}) {
    CHECK(cmp.rows[i].summary.mean_apsr == m.mean_apsr);
    CHECK(cmp.rows[i].summary.adv_miou == m.adv_miou);
  }
}

TEST_CASE("bench times both variants on every image") {
  Fixture fx("bench");
  const auto inputs = EvalInputs::load(fx.checkpoint, fx.manifest);
  AttackConfig a;
  a.epsilon = 2;
  const auto b = bench(inputs, a, LossScheme::zero_out, (fx.dir / "bench").string());
  CHECK(b.images == 6);
  CHECK(b.plain_seconds > 0.0);
  CHECK(b.weighted_seconds > 0.0);
  CHECK(b.weighted.loss == LossScheme::zero_out);
  CHECK(read_csv((fx.dir / "bench" / "bench.csv").string()).rows.size() == 6);
}
