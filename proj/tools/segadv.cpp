#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "segadv/data/manifest.hpp"
#include "segadv/error.hpp"
#include "segadv/eval/csv.hpp"
#include "segadv/eval/experiment.hpp"
#include "segadv/eval/overlay.hpp"
#include "segadv/data/netpbm.hpp"
#include "segadv/model/checkpoint.hpp"
#include "segadv/model/trainer.hpp"

namespace fs = std::filesystem;
using namespace segadv;

namespace {

struct Args {
  std::string config;
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

KvConfig load_config(const std::string& path) { return path.empty() ? KvConfig{} : KvConfig::load(path); }

// Splits off the keys in `extra`, returning them; `cfg` keeps the rest.
KvConfig take_keys(KvConfig& cfg, std::initializer_list<std::string> extra) {
  KvConfig taken, rest;
  for (const auto& [k, v] : cfg.values()) {
    bool hit = false;
    for (const auto& e : extra) hit = hit || e == k;
    (hit ? taken : rest).set(k, v);
  }
  cfg = rest;
  return taken;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path);
}

int generate_data(const Args& a) {
  auto kv = load_config(a.config);
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  const auto spec = DatasetSpec::from_config(kv);
  const auto ds = generate(spec);
  const auto stats = channel_stats(ds.train);
  fs::create_directories(a.out);
  const auto train = write_split(a.out, "train", ds.train, spec.num_classes, stats);
  const auto val = write_split(a.out, "val", ds.val, spec.num_classes, stats);
  write_text(a.out + "/dataset.cfg", spec.to_config().to_string());
  std::printf("wrote %zu train and %zu val images\n  %s\n  %s\n", ds.train.size(), ds.val.size(), train.c_str(),
              val.c_str());
  return 0;
}

int train_model(const Args& a) {
  auto kv = load_config(a.config);
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  const auto cfg = TrainConfig::from_config(kv);
  const auto manifest = Manifest::load(a.manifest);
  const auto data = manifest.load_images();
  auto model = SegModel::he_init(Architecture::default_fcn(static_cast<std::size_t>(manifest.num_classes)),
                                 manifest.stats, cfg.seed);
  fs::create_directories(a.out);
  CsvWriter log(a.out + "/train_loss.csv", {"epoch", "loss"});
  const auto start = std::chrono::steady_clock::now();
  const auto result = train(model, data, cfg, [&](int epoch, double loss) {
    log.row({std::to_string(epoch + 1), format_double(loss)});
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("epoch %3d  loss %.5f  (%.0f s)\n", epoch + 1, loss, t);
    std::fflush(stdout);
  });
  const TrainingMetadata meta{static_cast<std::uint32_t>(cfg.epochs), static_cast<float>(result.final_loss()),
                              cfg.seed};
  save_checkpoint(a.out + "/model.ckpt", model, meta);
  write_text(a.out + "/train.cfg", cfg.to_config().to_string());
  std::printf("final loss %.5f\ncheckpoint %s/model.ckpt (%s)\n", result.final_loss(), a.out.c_str(),
              checkpoint_hash(a.out + "/model.ckpt").c_str());
  return 0;
}

int attack(const Args& a) {
  auto kv = load_config(a.config);
  const auto extra = take_keys(kv, {"limit"});
  auto cfg = AttackConfig::from_config(kv);
  if (a.seed) cfg.seed = *a.seed;
  const auto inputs =
      EvalInputs::load(a.checkpoint, a.manifest, static_cast<std::size_t>(extra.get_int("limit", 0)));
  const auto run = evaluate_attack(inputs.model, inputs.images, cfg, a.jobs, inputs.images.size());

  fs::create_directories(a.out + "/adv");
  const std::string summary = cfg.summary();
  CsvWriter csv(a.out + "/attack.csv",
                {"image", "clean_apsr", "adv_apsr", "linf", "restart", "seconds", "config", "checkpoint"});
  CsvWriter trace(a.out + "/trace.csv", {"image", "iteration", "apsr"});
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    const auto& r = run.records[i];
    csv.row({r.id, format_double(r.clean_apsr), format_double(r.adv_apsr), format_double(r.linf),
             std::to_string(r.restart), format_double(r.seconds), summary, inputs.checkpoint_hash});
    const auto& res = run.kept[i];
    for (std::size_t t = 0; t < res.apsr_trace.size(); ++t)
      trace.row({r.id, std::to_string(t), format_double(res.apsr_trace[t])});
    write_ppm(a.out + "/adv/" + r.id + ".ppm", res.adversarial);
    write_raster(a.out + "/adv/" + r.id + "_perturbation.ppm", perturbation_heatmap(res.perturbation, cfg.epsilon));
  }
  const auto& s = run.summary;
  std::printf("%s on %zu images: clean APSR %.4f -> %.4f, mIoU %.4f -> %.4f, %.3f s/frame\n", summary.c_str(),
              s.images, s.clean_apsr, s.mean_apsr, s.clean_miou, s.adv_miou, s.mean_seconds);
  return 0;
}

int evaluate(const Args& a) {
  const auto spec = ExperimentSpec::load(a.config);
  const auto inputs = EvalInputs::load(a.checkpoint, a.manifest, spec.limit);
  const auto report = run_experiment(inputs, spec, a.out, RunOptions{a.jobs, a.seed});
  std::printf("%-24s %8s %8s %9s %9s\n", "attack", "APSR", "dmIoU", "s/frame", "images");
  for (const auto& r : report.runs) {
    const auto& s = r.summary;
    std::printf("%-24s %8.4f %8.4f %9.4f %9zu\n", s.config.name.c_str(), s.mean_apsr, s.delta_miou, s.mean_seconds,
                s.images);
  }
  std::printf("wrote %s/summary.csv and %s/per_image.csv\n", a.out.c_str(), a.out.c_str());
  return 0;
}

int compare_measures(const Args& a) {
  const auto spec = ExperimentSpec::load(a.config);
  const auto inputs = EvalInputs::load(a.checkpoint, a.manifest, spec.limit);
  const auto cmp = measure_comparison(inputs, spec.attacks, a.out, RunOptions{a.jobs, a.seed});
  std::printf("%-16s %-6s %8s %8s\n", "attack", "loss", "APSR", "dmIoU");
  for (const auto& r : cmp.rows)
    std::printf("%-16s %-6s %8.4f %8.4f\n", r.attack.c_str(), r.measure.c_str(), r.summary.mean_apsr,
                r.summary.delta_miou);
  for (const auto& c : cmp.checks)
    std::printf("[%s] %s (%s)\n", c.passed ? "pass" : "warn", c.name.c_str(), c.detail.c_str());
  return 0;
}

int run_bench(const Args& a) {
  auto kv = load_config(a.config);
  const auto extra = take_keys(kv, {"limit", "weighted_loss"});
  auto cfg = AttackConfig::from_config(kv);
  if (a.seed) cfg.seed = *a.seed;
  if (a.jobs != 1) std::fprintf(stderr, "bench always runs single-threaded; ignoring --jobs\n");
  const auto inputs =
      EvalInputs::load(a.checkpoint, a.manifest, static_cast<std::size_t>(extra.get_int("limit", 0)));
  const auto weighted = parse_loss_scheme(extra.get_string("weighted_loss", "zero_out"));
  const auto b = bench(inputs, cfg, weighted, a.out);
  std::printf("%zu images: plain %.4f s/frame, %s %.4f s/frame, ratio %.3f\n", b.images, b.plain_seconds,
              to_string(weighted).c_str(), b.weighted_seconds, b.ratio());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pixel-wise adversarial attacks on a toy segmentation model"};
  app.require_subcommand(1);
  Args args;

  auto add = [&](const std::string& name, const std::string& help, bool needs_config, bool needs_checkpoint,
                 bool needs_manifest) {
    auto* sub = app.add_subcommand(name, help);
    auto* c = sub->add_option("--config", args.config, "key=value config file");
    if (needs_config) c->required();
    if (needs_checkpoint) sub->add_option("--checkpoint", args.checkpoint, "model checkpoint")->required();
    if (needs_manifest) sub->add_option("--manifest", args.manifest, "dataset manifest")->required();
    sub->add_option("--out", args.out, "output directory")->required();
    sub->add_option("--seed", args.seed, "override the seed");
    sub->add_option("--jobs", args.jobs, "worker threads")->check(CLI::PositiveNumber);
    return sub;
  };
  auto* gen = add("generate-data", "generate the synthetic shapes dataset", false, false, false);
  auto* tr = add("train", "train the segmentation model", false, false, true);
  auto* at = add("attack", "attack every image of a manifest", true, true, true);
  auto* ev = add("evaluate", "run an experiment file", true, true, true);
  auto* cm = add("compare-measures", "compare plain and uncertainty-weighted losses", true, true, true);
  auto* be = add("bench", "time plain against weighted attacks", true, true, true);

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return generate_data(args);
    if (tr->parsed()) return train_model(args);
    if (at->parsed()) return attack(args);
    if (ev->parsed()) return evaluate(args);
    if (cm->parsed()) return compare_measures(args);
    if (be->parsed()) return run_bench(args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
