#include "cadd/training/trainer.hpp"

#include <algorithm>
#include <random>

#include "cadd/datagen/render.hpp"
#include "cadd/datagen/wav.hpp"
#include "cadd/encoders/prosody.hpp"
#include "cadd/errors.hpp"
#include "cadd/seed.hpp"
#include "parallel.hpp"

namespace cadd::training {

namespace {

std::vector<std::vector<double>> snapshot(const Dacm& model) {
  std::vector<std::vector<double>> out;
  for (const auto& p : model.named_parameters())
    out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void restore(const Dacm& model, const std::vector<std::vector<double>>& values) {
  const auto& params = model.named_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    std::copy(values[i].begin(), values[i].end(), t.values_mut().begin());
  }
}

void reject_test_samples(const EncodedCorpus& corpus, std::span<const std::size_t> indices,
                         const char* role) {
  for (auto i : indices) {
    if (i >= corpus.samples.size()) throw IndexError("sample index out of range");
    if (corpus.records[i].split == datagen::Split::Test) {
      throw ValidationError(std::string("test sample ") + corpus.records[i].sample_id + " passed as " +
                            role + " data");
    }
  }
}

}  // namespace

std::vector<Tensor> extract_audio_features(const std::vector<datagen::ManifestRecord>& records,
                                           const std::optional<std::filesystem::path>& root,
                                           std::uint64_t corpus_seed, unsigned threads) {
  if (root) {
    std::string missing;
    std::size_t count = 0;
    for (const auto& r : records) {
      if (std::filesystem::exists(*root / r.audio_path)) continue;
      if (count++ < 20) missing += (missing.empty() ? "" : ", ") + r.sample_id;
    }
    if (count > 0) {
      throw IoError(std::to_string(count) + " audio file(s) missing: " + missing +
                    (count > 20 ? ", ..." : ""));
    }
  }
  const encoders::AudioEncoder featurizer(1, 0, 1);  // frame features do not depend on width
  std::vector<Tensor> out(records.size());
  detail::parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto& r = records[i];
    datagen::Waveform wave;
    if (root) {
      wave = datagen::read_wav(*root / r.audio_path);
    } else {
      const std::size_t index = std::stoul(r.sample_id);
      wave = datagen::render_waveform(r.text, datagen::voice(r.voice),
                                      datagen::emotion_tag(r.emotion_tag),
                                      datagen::sample_seed(corpus_seed, index));
      for (auto& x : wave.samples) x = datagen::quantize_pcm16(x);
    }
    out[i] = featurizer.layer_stack(wave).features;
  });
  return out;
}

std::vector<std::size_t> EncodedCorpus::indices(datagen::Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == split) out.push_back(i);
  return out;
}

EncodedCorpus encode_corpus(std::vector<datagen::ManifestRecord> records,
                            const std::vector<Tensor>& audio_features,
                            const model::ModelConfig& config) {
  if (records.size() != audio_features.size()) {
    throw ShapeError("one audio feature matrix is needed per record");
  }
  const model::Featurizer featurizer(config);
  EncodedCorpus c;
  c.samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto s = featurizer.encode_features(records[i].text, audio_features[i]);
    s.label = static_cast<std::size_t>(records[i].label);
    s.text_valence = records[i].text_valence;
    s.acoustic_valence = records[i].acoustic_valence;
    c.samples.push_back(std::move(s));
  }
  c.records = std::move(records);
  return c;
}

TrainResult train(Dacm& model, const EncodedCorpus& corpus, std::span<const std::size_t> train_indices,
                  std::span<const std::size_t> val_indices, const TrainConfig& config,
                  std::uint64_t seed, const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_indices.empty() || val_indices.empty()) throw ConfigError("train and val sets must be non-empty");
  if (config.batch_size == 0 || config.max_epochs == 0 || config.patience == 0) {
    throw ConfigError("batch size, epochs and patience must be positive");
  }
  reject_test_samples(corpus, train_indices, "training");
  reject_test_samples(corpus, val_indices, "validation");

  auto params = model.parameters();
  auto state = numeric::OptimizerState::for_params(params, config.optimizer);
  std::vector<std::size_t> order(train_indices.begin(), train_indices.end());
  std::mt19937_64 dropout_rng(derive_seed({seed, 0xD50Du}));

  TrainResult result;
  auto best = snapshot(model);
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(derive_seed({seed, 0x5F1Eu, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    model::LossBreakdown sums;
    std::size_t batches = 0;
    std::vector<const EncodedSample*> batch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(&corpus.samples[order[k]]);
      numeric::zero_grads(params);
      model::LossBreakdown parts;
      const auto loss = model.batch_loss(batch, true, dropout_rng, &parts);
      loss.backward();
      numeric::clip_grad_norm(params, config.clip_norm);
      numeric::adamw_step(params, state);
      sums.total += parts.total;
      sums.ce += parts.ce;
      sums.margin += parts.margin;
      sums.aux_text += parts.aux_text;
      sums.aux_audio += parts.aux_audio;
      sums.agreement += parts.agreement;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.components = {sums.total / nb,    sums.ce / nb,        sums.margin / nb,
                      sums.aux_text / nb, sums.aux_audio / nb, sums.agreement / nb};
    rec.train_loss = rec.components.total;
    rec.val_macro_f1 = evaluate(model, corpus, val_indices).macro_f1;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_macro_f1 > result.best_val_macro_f1) {
      result.best_val_macro_f1 = rec.val_macro_f1;
      result.best_epoch = epoch;
      best = snapshot(model);
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  restore(model, best);
  numeric::zero_grads(params);
  return result;
}

std::vector<std::size_t> predict(const Dacm& model, const EncodedCorpus& corpus,
                                 std::span<const std::size_t> indices) {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const auto result = model.forward(corpus.samples.at(i));
    const auto logits = result.class_logits.values();
    out.push_back(static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
  }
  return out;
}

EvalReport evaluate(const Dacm& model, const EncodedCorpus& corpus,
                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw ValidationError("cannot evaluate an empty split");
  ConfusionMatrix m;
  double mismatch = 0.0;
  for (auto i : indices) {
    const auto out = model.forward(corpus.samples.at(i));
    const auto logits = out.class_logits.values();
    const auto pred = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    m.add(corpus.samples[i].label, pred);
    mismatch += out.mismatch;
  }
  auto r = score(m);
  if (!indices.empty()) r.mean_mismatch = mismatch / static_cast<double>(indices.size());
  return r;
}

}  // namespace cadd::training
