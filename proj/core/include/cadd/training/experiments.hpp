#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cadd/training/trainer.hpp"

namespace cadd::training {

struct AblationCell {
  model::Variant variant = model::Variant::Full;
  std::uint64_t seed = 0;
  TrainResult training;
  EvalReport val;
  EvalReport test;
  double seconds = 0.0;
  std::string error;  // non-empty when the cell failed; other cells still run
};

struct VariantSummary {
  model::Variant variant = model::Variant::Full;
  double mean_macro_f1 = 0.0;
  double std_macro_f1 = 0.0;  // sample standard deviation over seeds
  std::array<double, kClassCount> mean_f1{};
  /// Per-class test F1 of the seed with the highest test macro-F1.
  std::uint64_t best_seed = 0;
  std::array<double, kClassCount> best_seed_f1{};
  /// Same, with the seed chosen by val macro-F1 instead.
  std::uint64_t best_val_seed = 0;
  std::array<double, kClassCount> best_val_seed_f1{};
  std::size_t failed_cells = 0;
};

struct AblationReport {
  std::vector<AblationCell> cells;
  std::vector<VariantSummary> summary;

  const VariantSummary& find(model::Variant v) const;
  /// mean macro-F1(a) - mean macro-F1(b).
  double delta(model::Variant a, model::Variant b) const;
  std::string to_table() const;
  /// One JSON object per cell, then one per variant summary.
  std::string to_jsonl() const;
};

struct AblationOptions {
  model::ModelConfig model;  // variant field is overridden per cell
  TrainConfig train;
  std::vector<model::Variant> variants;
  std::vector<std::uint64_t> seeds{42, 123, 456};
  unsigned threads = 1;
  std::function<void(const AblationCell&)> on_cell;
};

/// Trains every (variant, seed) cell on the corpus's train split, selects by
/// val and reports val and test. Cells are independent jobs; the report is
/// assembled in variant-then-seed order regardless of completion order.
AblationReport run_ablation(const EncodedCorpus& corpus, const AblationOptions& options);

struct LovoFold {
  std::string voice;
  std::size_t train_size = 0, val_size = 0, test_size = 0;
  TrainResult training;
  EvalReport test;
};

struct LovoReport {
  std::vector<LovoFold> folds;
  double mean_macro_f1 = 0.0;

  std::string to_table() const;
  std::string to_jsonl() const;
};

/// Leave-one-voice-out over exactly three voices: each voice in turn is the
/// test set. The remaining voices are re-split into train and val within each class by whole
/// sentence groups, `val_fraction` of each class going to val.
LovoReport run_lovo(const EncodedCorpus& corpus, const model::ModelConfig& config,
                    const TrainConfig& train_config, std::uint64_t seed, double val_fraction = 0.15,
                    unsigned threads = 1);

/// The re-split used by one LOVO fold, exposed for auditing: a copy of the
/// corpus whose split column marks the held-out voice as test.
EncodedCorpus lovo_fold_corpus(const EncodedCorpus& corpus, const std::string& held_out_voice,
                               std::uint64_t seed, double val_fraction);

}  // namespace cadd::training
