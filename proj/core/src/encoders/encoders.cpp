#include "cadd/encoders/encoders.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "cadd/datagen/render.hpp"
#include "cadd/errors.hpp"
#include "cadd/numeric/ops.hpp"
#include "cadd/seed.hpp"

namespace cadd::encoders {

namespace ops = numeric;

namespace {

constexpr std::uint64_t kVocabSalt = 0x5EEDC0DEULL;
// Valence magnitude written into the designated coordinate.
constexpr double kTokenValence = 1.0;
constexpr double kClsValence = 0.3;
// The [CLS] summary is a noisy reading of sentence valence: a fixed
// per-sentence offset on the same coordinate.
constexpr double kClsNuisance = 0.3;

constexpr std::array<std::string_view, 62> kPositiveWords{
    "fine",      "well",     "great",     "calm",      "happy",     "proud",     "wonderful",
    "rested",    "better",   "grateful",  "fun",       "confident", "smoothly",  "laughed",
    "beautiful", "peaceful", "good",      "success",   "celebrated", "enjoyed",  "hopeful",
    "amazing",   "lovely",   "easy",      "relaxed",   "excited",   "glad",      "cheerful",
    "sweet",     "kind",     "excellent", "love",      "perfect",   "positive",  "productive",
    "bright",    "energy",   "delicious", "friendly",  "thankful",  "won",       "joyful",
    "energized", "fantastic", "praised",  "content",   "safe",      "interesting", "pleasant",
    "sunshine",  "nice",     "joy",       "smile",     "loved",     "best",      "relieved",
    "excitement", "cheerfully", "calmly", "wonderfully", "gratitude", "hope",
};

constexpr std::array<std::string_view, 64> kNegativeWords{
    "wrong",     "terrible",  "exhausted", "sad",       "awful",      "stressful",  "worried",
    "failed",    "angry",     "lonely",    "anxious",   "lost",       "hurt",       "ruined",
    "tired",     "disaster",  "bad",       "frustrated", "empty",     "cold",       "missed",
    "late",      "stuck",     "boring",    "cancelled", "scared",     "horrible",   "guilty",
    "problems",  "miserable", "drained",   "badly",     "overwhelmed", "crashed",   "upset",
    "depressed", "sick",      "weak",      "apart",     "disappointed", "rude",     "nervous",
    "tense",     "painful",   "hard",      "exhausting", "ashamed",   "stressed",   "grim",
    "hopeless",  "chaotic",   "unpleasant", "broke",    "annoyed",    "bitter",     "unfair",
    "pain",      "worse",     "embarrassed", "failure", "heavy",      "appalled",   "afraid",
    "hate",
};

std::vector<double> gaussian_matrix(std::size_t n, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

void check_layer_weights(const Tensor& w, std::size_t depth) {
  if (w.rank() != 1 || w.size() != depth) {
    throw ShapeError("layer weights must have one entry per layer (" + std::to_string(depth) + ")");
  }
}

}  // namespace

LayerStack LayerStack::from_layers(std::span<const Tensor> per_layer) {
  if (per_layer.empty()) throw ShapeError("layer stack needs at least one layer");
  const auto& first = per_layer.front();
  if (first.rank() != 2) throw ShapeError("layers must be [T x d] matrices");
  LayerStack s;
  s.rows = first.dim(0);
  s.width = first.dim(1);
  std::vector<double> flat;
  flat.reserve(per_layer.size() * first.size());
  for (const auto& layer : per_layer) {
    if (layer.shape() != first.shape()) {
      throw ShapeError("inconsistent layer shapes " + numeric::shape_string(layer.shape()) +
                       " vs " + numeric::shape_string(first.shape()));
    }
    flat.insert(flat.end(), layer.values().begin(), layer.values().end());
  }
  s.layers = Tensor({per_layer.size(), s.rows * s.width}, std::move(flat));
  return s;
}

LayerStack ProjectedLayerStack::materialize() const {
  const std::size_t f = features.dim(1);
  std::vector<Tensor> per_layer;
  for (std::size_t l = 0; l < depth(); ++l) {
    auto row = projections.values().subspan(l * f * width, f * width);
    Tensor p({f, width}, std::vector<double>(row.begin(), row.end()));
    per_layer.push_back(ops::matmul(features, p));
  }
  return LayerStack::from_layers(per_layer);
}

Tensor weighted_layer_pool(const LayerStack& stack, const Tensor& layer_weights) {
  check_layer_weights(layer_weights, stack.depth());
  auto mixed = ops::matmul(ops::softmax(layer_weights, 0), stack.layers);
  return ops::reshape(mixed, {stack.rows, stack.width});
}

Tensor mixed_projection(const ProjectedLayerStack& stack, const Tensor& layer_weights) {
  check_layer_weights(layer_weights, stack.depth());
  auto mixed = ops::matmul(ops::softmax(layer_weights, 0), stack.projections);
  return ops::reshape(mixed, {stack.features.dim(1), stack.width});
}

Tensor weighted_layer_pool(const ProjectedLayerStack& stack, const Tensor& layer_weights) {
  return ops::matmul(stack.features, mixed_projection(stack, layer_weights));
}

Tensor uniform_layer_weights(std::size_t depth) { return Tensor({depth}, 0.0); }

// ---------------------------------------------------------------------------
// Text

TextEncoder::TextEncoder(std::size_t width, std::uint64_t seed, std::size_t depth)
    : width_(width), depth_(depth), seed_(seed) {
  if (width < 2) throw ConfigError("text encoder width must be at least 2");
  if (depth < 1) throw ConfigError("text encoder needs at least one layer");
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  for (std::size_t l = 0; l < depth; ++l) {
    token_maps_.push_back(gaussian_matrix(width * width, 1.2 * scale, derive_seed({seed, 0x70u, l})));
    context_maps_.push_back(gaussian_matrix(width * width, 0.6 * scale, derive_seed({seed, 0xC7u, l})));
  }
  for (auto w : kPositiveWords) positive_ids_.push_back(token_id(w));
  for (auto w : kNegativeWords) negative_ids_.push_back(token_id(w));
  std::sort(positive_ids_.begin(), positive_ids_.end());
  std::sort(negative_ids_.begin(), negative_ids_.end());
}

std::int64_t TextEncoder::token_id(std::string_view word) {
  // Id 0 is reserved for [CLS].
  return 1 + static_cast<std::int64_t>(fnv1a(word, fnv1a("vocab", kVocabSalt)) %
                                       static_cast<std::uint64_t>(kVocabSize - 1));
}

std::vector<std::int64_t> TextEncoder::tokenize(std::string_view text) const {
  std::vector<std::int64_t> ids{kClsId};
  for (const auto& w : datagen::split_words(text)) ids.push_back(token_id(w));
  return ids;
}

double TextEncoder::token_polarity(std::int64_t id) const {
  if (std::binary_search(positive_ids_.begin(), positive_ids_.end(), id)) return 1.0;
  if (std::binary_search(negative_ids_.begin(), negative_ids_.end(), id)) return -1.0;
  return 0.0;
}

std::vector<double> TextEncoder::embedding(std::int64_t id) const {
  auto e = gaussian_matrix(width_, 0.8, derive_seed({seed_, 0xEEu, static_cast<std::uint64_t>(id)}));
  e[kValenceDim] = kTokenValence * token_polarity(id);
  return e;
}

LayerStack TextEncoder::layer_stack(std::span<const std::int64_t> token_ids) const {
  if (token_ids.empty()) throw ValidationError("encode_text: empty token sequence");
  const std::size_t t_len = token_ids.size(), d = width_;

  double sentence_polarity = 0.0;
  for (std::size_t t = 1; t < t_len; ++t) sentence_polarity += token_polarity(token_ids[t]);
  std::uint64_t sentence_hash = seed_;
  for (auto id : token_ids) sentence_hash = splitmix64(sentence_hash ^ static_cast<std::uint64_t>(id));
  std::mt19937_64 nuisance_rng(sentence_hash);
  const double cls_valence = kClsValence * std::tanh(1.5 * sentence_polarity) +
                             kClsNuisance * std::normal_distribution<double>(0.0, 1.0)(nuisance_rng);

  std::vector<double> h(t_len * d);
  for (std::size_t t = 0; t < t_len; ++t) {
    auto e = embedding(token_ids[t]);
    std::copy(e.begin(), e.end(), h.begin() + static_cast<std::ptrdiff_t>(t * d));
  }

  std::vector<double> flat;
  flat.reserve(depth_ * t_len * d);
  // Mixing never reads the valence coordinate, so valence reaches a row only
  // through its own designated entry.
  std::vector<double> next(t_len * d), context(d), mixed_context(d);
  for (std::size_t l = 0; l < depth_; ++l) {
    std::fill(context.begin(), context.end(), 0.0);
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t j = 0; j < d; ++j) context[j] += h[t * d + j] / static_cast<double>(t_len);
    const auto& m = token_maps_[l];
    const auto& c = context_maps_[l];
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        if (j != kValenceDim) acc += c[i * d + j] * context[j];
      mixed_context[i] = acc;
    }
    for (std::size_t t = 0; t < t_len; ++t) {
      for (std::size_t i = 0; i < d; ++i) {
        double acc = mixed_context[i];
        for (std::size_t j = 0; j < d; ++j)
          if (j != kValenceDim) acc += m[i * d + j] * h[t * d + j];
        next[t * d + i] = std::tanh(acc);
      }
      next[t * d + kValenceDim] = t == 0 ? cls_valence : kTokenValence * token_polarity(token_ids[t]);
    }
    h.swap(next);
    flat.insert(flat.end(), h.begin(), h.end());
  }
  LayerStack s;
  s.rows = t_len;
  s.width = d;
  s.layers = Tensor({depth_, t_len * d}, std::move(flat));
  return s;
}

EncoderOutput TextEncoder::encode(std::span<const std::int64_t> token_ids) const {
  const auto stack = layer_stack(token_ids);
  EncoderOutput out;
  out.sequence = weighted_layer_pool(stack, uniform_layer_weights(depth_));
  auto row0 = out.sequence.values().subspan(0, width_);
  out.pooled = Tensor::vector(std::vector<double>(row0.begin(), row0.end()));
  out.mask.assign(stack.rows, true);
  return out;
}

// ---------------------------------------------------------------------------
// Audio

AudioEncoder::AudioEncoder(std::size_t width, std::uint64_t seed, std::size_t depth)
    : width_(width), depth_(depth), seed_(seed) {
  if (width < 1) throw ConfigError("audio encoder width must be positive");
  if (depth < 1) throw ConfigError("audio encoder needs at least one layer");
  const std::size_t n = kFeatureCount * width;
  const double scale = 1.0 / std::sqrt(static_cast<double>(kFeatureCount));
  const auto base = gaussian_matrix(n, scale, derive_seed({seed, 0xA0u}));
  std::vector<double> flat;
  flat.reserve(depth * n);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto perturb = gaussian_matrix(n, 0.15 * scale, derive_seed({seed, 0xA1u, l}));
    for (std::size_t i = 0; i < n; ++i) flat.push_back(base[i] + perturb[i]);
  }
  projections_ = Tensor({depth, n}, std::move(flat));
}

Tensor AudioEncoder::frame_features(const std::vector<ProsodyFrame>& frames) const {
  const std::size_t t_len = frames.size();
  std::vector<double> x(t_len * kFeatureCount);
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto& f = frames[t];
    const double log_e = std::max(f.log_energy, -12.0);
    const bool voiced = f.pitch_hz > 0.0;
    double* row = x.data() + t * kFeatureCount;
    row[0] = 1.0;
    row[1] = (log_e + 8.0) / 4.0;
    row[2] = voiced ? 1.0 : 0.0;
    row[3] = voiced ? (f.pitch_hz - 160.0) / 40.0 : 0.0;
    row[4] = 4.0 * f.zero_crossing_rate - 1.0;
    row[5] = f.spectral_centroid_hz / 2000.0 - 1.0;
    if (t > 0) {
      const auto& p = frames[t - 1];
      row[6] = (log_e - std::max(p.log_energy, -12.0)) / 2.0;
      row[7] = voiced && p.pitch_hz > 0.0 ? (f.pitch_hz - p.pitch_hz) / 10.0 : 0.0;
    }
  }
  return Tensor({t_len, kFeatureCount}, std::move(x));
}

ProjectedLayerStack AudioEncoder::layer_stack_from_features(Tensor features) const {
  if (features.rank() != 2 || features.dim(1) != kFeatureCount) {
    throw ShapeError("audio features must be [T x " + std::to_string(kFeatureCount) + "]");
  }
  ProjectedLayerStack s;
  s.features = std::move(features);
  s.projections = projections_;
  s.width = width_;
  return s;
}

ProjectedLayerStack AudioEncoder::layer_stack(const datagen::Waveform& wave) const {
  if (wave.sample_rate != datagen::kSampleRate) {
    throw ValidationError("audio must be sampled at 16 kHz");
  }
  if (wave.duration_seconds() < kMinDurationSeconds) {
    throw ValidationError("audio shorter than 0.2 s");
  }
  return layer_stack_from_features(frame_features(extract_prosody(wave)));
}

EncoderOutput AudioEncoder::encode(const datagen::Waveform& wave) const {
  const auto stack = layer_stack(wave);
  EncoderOutput out;
  out.sequence = weighted_layer_pool(stack, uniform_layer_weights(depth_));
  out.mask.assign(stack.rows(), true);
  out.pooled = ops::masked_mean_rows(out.sequence, out.mask);
  return out;
}

EncoderOutput encode_text(std::span<const std::int64_t> token_ids, std::size_t width,
                          std::uint64_t seed) {
  return TextEncoder(width, seed).encode(token_ids);
}

EncoderOutput encode_audio(const datagen::Waveform& wave, std::size_t width, std::uint64_t seed) {
  return AudioEncoder(width, seed).encode(wave);
}

}  // namespace cadd::encoders
