#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cadd/datagen/corpus.hpp"
#include "cadd/model/dacm.hpp"
#include "cadd/numeric/optim.hpp"
#include "cadd/training/metrics.hpp"

namespace cadd::training {

using model::Dacm;
using model::EncodedSample;
using numeric::Tensor;

/// Normalised frame features for every manifest record, in manifest order.
/// With `root`, audio is read from the WAV files; otherwise each sample is
/// rendered in memory from `corpus_seed` and quantised exactly as a file
/// would hold it. Missing files abort with IoError naming up to 20 absent samples.
std::vector<Tensor> extract_audio_features(const std::vector<datagen::ManifestRecord>& records,
                                           const std::optional<std::filesystem::path>& root,
                                           std::uint64_t corpus_seed, unsigned threads = 0);

/// Manifest plus frozen-encoder products, aligned by index.
struct EncodedCorpus {
  std::vector<datagen::ManifestRecord> records;
  std::vector<EncodedSample> samples;

  std::vector<std::size_t> indices(datagen::Split split) const;
};

EncodedCorpus encode_corpus(std::vector<datagen::ManifestRecord> records,
                            const std::vector<Tensor>& audio_features,
                            const model::ModelConfig& config);

struct TrainConfig {
  numeric::AdamWConfig optimizer;
  std::size_t batch_size = 16;
  std::size_t patience = 7;
  double clip_norm = 1.0;
  std::size_t max_epochs = 60;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  model::LossBreakdown components;  // batch means averaged over the epoch
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  std::size_t best_epoch = 0;
  double best_val_macro_f1 = -1.0;
  std::vector<EpochRecord> history;
};

/// AdamW with gradient clipping and early stopping on validation macro-F1.
/// The parameters of the best epoch are restored before returning. Samples
/// whose record is marked as test are rejected, so nothing tuned here ever
/// sees held-out data.
TrainResult train(Dacm& model, const EncodedCorpus& corpus, std::span<const std::size_t> train_indices,
                  std::span<const std::size_t> val_indices, const TrainConfig& config,
                  std::uint64_t seed,
                  const std::function<void(const EpochRecord&)>& on_epoch = nullptr);

std::vector<std::size_t> predict(const Dacm& model, const EncodedCorpus& corpus,
                                 std::span<const std::size_t> indices);
/// Throws ValidationError for an empty index set.
EvalReport evaluate(const Dacm& model, const EncodedCorpus& corpus,
                    std::span<const std::size_t> indices);

}  // namespace cadd::training
