#include "segadv/eval/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <thread>

#include "segadv/data/manifest.hpp"
#include "segadv/data/netpbm.hpp"
#include "segadv/error.hpp"
#include "segadv/eval/csv.hpp"
#include "segadv/eval/overlay.hpp"
#include "segadv/model/checkpoint.hpp"

namespace fs = std::filesystem;

namespace segadv {

namespace {

std::string label(const AttackConfig& c) { return c.name.empty() ? to_string(c.family) : c.name; }

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&, j] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[j] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string num(double v) { return format_double(v); }

}  // namespace

ExperimentSpec ExperimentSpec::from_sections(const std::vector<KvSection>& sections) {
  ExperimentSpec spec;
  for (const auto& s : sections) {
    if (s.name.empty()) {
      s.config.check_keys({"overlays", "limit"}, "experiment");
      spec.overlays = static_cast<std::size_t>(s.config.get_int("overlays", static_cast<std::int64_t>(spec.overlays)));
      spec.limit = static_cast<std::size_t>(s.config.get_int("limit", 0));
      continue;
    }
    KvConfig cfg = s.config;
    if (!cfg.has("name")) cfg.set("name", s.name);
    try {
      spec.attacks.push_back(AttackConfig::from_config(cfg));
    } catch (const ConfigError& e) {
      throw ConfigError("[" + s.name + "] " + e.what());
    }
  }
  if (spec.attacks.empty()) throw ConfigError("experiment: no attack sections");
  for (std::size_t i = 0; i < spec.attacks.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (label(spec.attacks[i]) == label(spec.attacks[j]))
        throw ConfigError("experiment: duplicate attack name '" + label(spec.attacks[i]) + "'");
  return spec;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) { return from_sections(load_sections(path)); }

EvalInputs EvalInputs::load(const std::string& checkpoint, const std::string& manifest, std::size_t limit) {
  auto ck = load_checkpoint(checkpoint);
  auto hash = segadv::checkpoint_hash(checkpoint);
  auto m = Manifest::load(manifest);
  if (static_cast<std::size_t>(m.num_classes) != ck.model.num_classes())
    throw ConfigError("manifest " + manifest + " has " + std::to_string(m.num_classes) + " classes, checkpoint has " +
                      std::to_string(ck.model.num_classes()));
  if (limit > 0 && m.items.size() > limit) m.items.resize(limit);
  auto images = m.load_images();
  if (images.empty()) throw ConfigError("manifest " + manifest + " lists no images");
  return EvalInputs{std::move(ck.model), std::move(hash), std::move(images)};
}

AttackRun evaluate_attack(const SegModel& model, const std::vector<LabeledImage>& images, const AttackConfig& config,
                          std::size_t jobs, std::size_t keep) {
  // Reject bad configs before spending time on any image.
  for (const auto& img : images) check_attack_inputs(model, img.image, img.labels, config);

  const std::size_t n = images.size();
  std::vector<LabelMap> clean(n), adv(n);
  std::vector<AttackResult> results(n);
  AttackRun run;
  run.records.resize(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& img = images[i];
    clean[i] = predict(model, img.image).argmax();
    auto r = run_attack(model, img.image, img.labels, config, i);
    adv[i] = r.final_probs.argmax();
    double linf = 0.0;
    for (float d : r.perturbation.data()) linf = std::max(linf, std::abs(static_cast<double>(d)));
    run.records[i] = ImageRecord{img.id, apsr(clean[i], img.labels), r.final_apsr(), linf, r.restart, r.seconds};
    if (i < keep) results[i] = std::move(r);
  });

  const std::size_t c = model.num_classes();
  ConfusionMatrix cm_clean(c), cm_adv(c);
  AttackSummary& s = run.summary;
  s.config = config;
  s.images = n;
  for (std::size_t i = 0; i < n; ++i) {
    cm_clean.add(clean[i], images[i].labels);
    cm_adv.add(adv[i], images[i].labels);
    s.clean_apsr += run.records[i].clean_apsr;
    s.mean_apsr += run.records[i].adv_apsr;
    s.mean_seconds += run.records[i].seconds;
  }
  s.clean_apsr /= static_cast<double>(n);
  s.mean_apsr /= static_cast<double>(n);
  s.mean_seconds /= static_cast<double>(n);
  s.clean_miou = cm_clean.miou();
  s.adv_miou = cm_adv.miou();
  s.delta_miou = delta_miou(s.clean_miou, s.adv_miou);
  for (std::size_t i = 0; i < std::min(keep, n); ++i) run.kept.push_back(std::move(results[i]));
  return run;
}

EvalReport run_experiment(const EvalInputs& inputs, const ExperimentSpec& spec, const std::string& out_dir,
                          const RunOptions& options) {
  std::vector<AttackConfig> attacks = spec.attacks;
  for (auto& a : attacks) {
    if (options.seed) a.seed = *options.seed;
    for (const auto& img : inputs.images) check_attack_inputs(inputs.model, img.image, img.labels, a);
  }
  std::vector<LabeledImage> images = inputs.images;
  if (spec.limit > 0 && images.size() > spec.limit) images.resize(spec.limit);

  fs::create_directories(out_dir);
  const std::string ck = inputs.checkpoint_hash;
  CsvWriter per_image(out_dir + "/per_image.csv",
                      {"attack", "image", "clean_apsr", "adv_apsr", "linf", "restart", "seconds", "config", "checkpoint"});
  CsvWriter summary(out_dir + "/summary.csv", {"attack", "images", "clean_apsr", "mean_apsr", "clean_miou", "adv_miou",
                                               "delta_miou", "mean_seconds", "config", "checkpoint"});
  EvalReport report{ck, {}};
  for (const auto& a : attacks) {
    auto run = evaluate_attack(inputs.model, images, a, options.jobs, spec.overlays);
    const std::string name = label(a), cfg = a.summary();
    for (const auto& r : run.records)
      per_image.row({name, r.id, num(r.clean_apsr), num(r.adv_apsr), num(r.linf), std::to_string(r.restart),
                     num(r.seconds), cfg, ck});
    const auto& s = run.summary;
    summary.row({name, std::to_string(s.images), num(s.clean_apsr), num(s.mean_apsr), num(s.clean_miou),
                 num(s.adv_miou), num(s.delta_miou), num(s.mean_seconds), cfg, ck});

    if (!run.kept.empty()) {
      const std::string dir = out_dir + "/overlays/" + name;
      fs::create_directories(dir);
      for (std::size_t i = 0; i < run.kept.size(); ++i) {
        const auto& r = run.kept[i];
        const std::string base = dir + "/" + images[i].id;
        write_raster(base + "_clean_pred.ppm", colorize_labels(predict(inputs.model, images[i].image).argmax()));
        write_raster(base + "_adv_pred.ppm", colorize_labels(r.final_probs.argmax()));
        write_raster(base + "_perturbation.ppm", perturbation_heatmap(r.perturbation, a.epsilon));
        write_ppm(base + "_adv.ppm", r.adversarial);
      }
    }
    run.kept.clear();
    report.runs.push_back(std::move(run));
  }
  return report;
}

MeasureComparison measure_comparison(const EvalInputs& inputs, const std::vector<AttackConfig>& base,
                                     const std::string& out_dir, const RunOptions& options) {
  static const std::pair<const char*, LossScheme> kVariants[] = {
      {"plain", LossScheme::plain},
      {"E", LossScheme::entropy_weighted},
      {"M", LossScheme::margin_weighted},
      {"D", LossScheme::maxmin_weighted},
      {"Mbar", LossScheme::meanmargin_weighted},
  };
  MeasureComparison out;
  for (const auto& b : base) {
    for (const auto& [measure, scheme] : kVariants) {
      AttackConfig c = b;
      c.loss = scheme;
      if (options.seed) c.seed = *options.seed;
      auto run = evaluate_attack(inputs.model, inputs.images, c, options.jobs);
      out.rows.push_back({label(b), measure, run.summary});
    }
    const auto& rows = out.rows;
    const auto& e = rows[rows.size() - 4].summary;
    const auto& m = rows[rows.size() - 3].summary;
    out.checks.push_back({label(b) + ": APSR(E) >= APSR(M)", e.mean_apsr >= m.mean_apsr,
                          "E " + num(e.mean_apsr) + " vs M " + num(m.mean_apsr)});
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    CsvWriter csv(out_dir + "/measures.csv", {"attack", "measure", "images", "clean_apsr", "mean_apsr", "clean_miou",
                                              "adv_miou", "delta_miou", "mean_seconds", "config", "checkpoint"});
    for (const auto& r : out.rows) {
      const auto& s = r.summary;
      csv.row({r.attack, r.measure, std::to_string(s.images), num(s.clean_apsr), num(s.mean_apsr), num(s.clean_miou),
               num(s.adv_miou), num(s.delta_miou), num(s.mean_seconds), s.config.summary(), inputs.checkpoint_hash});
    }
    CsvWriter checks(out_dir + "/soft_checks.csv", {"check", "status", "detail"});
    for (const auto& c : out.checks) checks.row({c.name, c.passed ? "pass" : "warn", c.detail});
  }
  return out;
}

BenchResult bench(const EvalInputs& inputs, const AttackConfig& plain, LossScheme weighted,
                  const std::string& out_dir) {
  BenchResult b;
  b.plain = plain;
  b.plain.loss = LossScheme::plain;
  b.weighted = plain;
  b.weighted.loss = weighted;
  for (const auto& img : inputs.images) {
    check_attack_inputs(inputs.model, img.image, img.labels, b.plain);
    check_attack_inputs(inputs.model, img.image, img.labels, b.weighted);
  }
  std::vector<double> tp, tw;
  for (std::size_t i = 0; i < inputs.images.size(); ++i) {
    const auto& img = inputs.images[i];
    tp.push_back(run_attack(inputs.model, img.image, img.labels, b.plain, i).seconds);
    tw.push_back(run_attack(inputs.model, img.image, img.labels, b.weighted, i).seconds);
  }
  b.images = inputs.images.size();
  for (std::size_t i = 0; i < b.images; ++i) {
    b.plain_seconds += tp[i];
    b.weighted_seconds += tw[i];
  }
  b.plain_seconds /= static_cast<double>(b.images);
  b.weighted_seconds /= static_cast<double>(b.images);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    CsvWriter csv(out_dir + "/bench.csv", {"image", "plain_seconds", "weighted_seconds"});
    for (std::size_t i = 0; i < b.images; ++i) csv.row({inputs.images[i].id, num(tp[i]), num(tw[i])});
    CsvWriter sum(out_dir + "/bench_summary.csv",
                  {"attack", "loss", "images", "plain_seconds", "weighted_seconds", "ratio", "config", "checkpoint"});
    sum.row({label(plain), to_string(weighted), std::to_string(b.images), num(b.plain_seconds),
             num(b.weighted_seconds), num(b.ratio()), b.weighted.summary(), inputs.checkpoint_hash});
  }
  return b;
}

}  // namespace segadv
