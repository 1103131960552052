#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segadv/attack/attack.hpp"
#include "segadv/data/shapes.hpp"
#include "segadv/eval/metrics.hpp"
#include "segadv/kv_config.hpp"
#include "segadv/model/seg_model.hpp"

namespace segadv {

// Experiment file: global keys before the first section, then one
// `[name]` section per attack config.
//
//   overlays = 2     # images that get PPM overlays
//   limit = 50       # evaluate the first N images (0: all)
//
//   [ifgsm8_l0]
//   family = ifgsm
//   epsilon = 8
//   loss = zero_out
struct ExperimentSpec {
  std::vector<AttackConfig> attacks;
  std::size_t overlays = 2;
  std::size_t limit = 0;

  static ExperimentSpec from_sections(const std::vector<KvSection>& sections);
  static ExperimentSpec load(const std::string& path);
};

// Model and images, loaded and cross-checked before any attack runs.
struct EvalInputs {
  SegModel model;
  std::string checkpoint_hash;
  std::vector<LabeledImage> images;

  static EvalInputs load(const std::string& checkpoint, const std::string& manifest, std::size_t limit = 0);
};

struct ImageRecord {
  std::string id;
  double clean_apsr = 0.0;
  double adv_apsr = 0.0;
  double linf = 0.0;
  int restart = 0;
  double seconds = 0.0;
};

struct AttackSummary {
  AttackConfig config;
  std::size_t images = 0;
  double clean_apsr = 0.0;
  double mean_apsr = 0.0;
  double clean_miou = 0.0;
  double adv_miou = 0.0;
  double delta_miou = 0.0;
  double mean_seconds = 0.0;
};

struct AttackRun {
  AttackSummary summary;
  std::vector<ImageRecord> records;
  std::vector<AttackResult> kept;  // results of the first `keep` images
};

// Attacks every image with `jobs` threads. Aggregates are reduced in image
// order, so the output does not depend on `jobs`. Image i uses stream i.
AttackRun evaluate_attack(const SegModel& model, const std::vector<LabeledImage>& images, const AttackConfig& config,
                          std::size_t jobs = 1, std::size_t keep = 0);

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;  // replaces every attack's seed
};

struct EvalReport {
  std::string checkpoint_hash;
  std::vector<AttackRun> runs;
};

// Writes per_image.csv, summary.csv and overlays/<attack>/<id>_*.ppm.
EvalReport run_experiment(const EvalInputs& inputs, const ExperimentSpec& spec, const std::string& out_dir,
                          const RunOptions& options = {});

struct MeasureRow {
  std::string attack;
  std::string measure;  // plain, E, M, D, Mbar
  AttackSummary summary;
};

struct SoftCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct MeasureComparison {
  std::vector<MeasureRow> rows;  // five per attack
  std::vector<SoftCheck> checks;
};

// Runs each base attack with plain and the four weighted losses. Writes
// measures.csv and soft_checks.csv when out_dir is non-empty.
MeasureComparison measure_comparison(const EvalInputs& inputs, const std::vector<AttackConfig>& base,
                                     const std::string& out_dir, const RunOptions& options = {});

struct BenchResult {
  AttackConfig plain;
  AttackConfig weighted;
  std::size_t images = 0;
  double plain_seconds = 0.0;     // mean per frame
  double weighted_seconds = 0.0;  // mean per frame
  double ratio() const { return plain_seconds > 0.0 ? weighted_seconds / plain_seconds : 0.0; }
};

// Single-threaded; plain and weighted runs alternate per image so both see
// the same machine state. Writes bench.csv when out_dir is non-empty.
BenchResult bench(const EvalInputs& inputs, const AttackConfig& plain, LossScheme weighted,
                  const std::string& out_dir);

}  // namespace segadv
