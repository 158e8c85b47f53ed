#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cadd/datagen/wav.hpp"
#include "cadd/encoders/prosody.hpp"
#include "cadd/numeric/tensor.hpp"

namespace cadd::encoders {

using numeric::Tensor;

inline constexpr std::size_t kDefaultLayers = 12;
inline constexpr std::size_t kDefaultWidth = 64;

/// Frozen encoder product: pooled vector, full sequence and validity mask.
struct EncoderOutput {
  Tensor pooled;    // [d]
  Tensor sequence;  // [T x d]
  std::vector<bool> mask;
};

/// L hidden layers of one input, stored as one [L x (T*d)] matrix so a
/// weighted layer average is a single vector-matrix product.
struct LayerStack {
  Tensor layers;  // [L x (T*d)], no grad
  std::size_t rows = 0;
  std::size_t width = 0;

  std::size_t depth() const { return layers.dim(0); }
  static LayerStack from_layers(std::span<const Tensor> per_layer);
};

/// Audio layers share one structure: layer l = features * P_l. Keeping the
/// factors avoids materialising L copies of a long frame sequence.
struct ProjectedLayerStack {
  Tensor features;     // [T x F], no grad
  Tensor projections;  // [L x (F*d)], no grad
  std::size_t width = 0;

  std::size_t rows() const { return features.dim(0); }
  std::size_t depth() const { return projections.dim(0); }
  LayerStack materialize() const;
};

/// softmax(w)-weighted sum of the layers -> [T x d]. Gradient flows to w only.
Tensor weighted_layer_pool(const LayerStack& stack, const Tensor& layer_weights);

/// Mixed projection sum_l softmax(w)_l P_l as an [F x d] matrix; the pooled
/// sequence is features * mixed projection.
Tensor mixed_projection(const ProjectedLayerStack& stack, const Tensor& layer_weights);
Tensor weighted_layer_pool(const ProjectedLayerStack& stack, const Tensor& layer_weights);

/// Zero logits, i.e. a uniform layer average.
Tensor uniform_layer_weights(std::size_t depth);

/// Whitespace/punctuation tokenizer with a fixed seeded vocabulary hash and a
/// synthetic contextual encoder. Position 0 is a [CLS] token whose final
/// vector is the pooled output.
class TextEncoder {
 public:
  static constexpr std::size_t kValenceDim = 0;
  static constexpr std::int64_t kClsId = 0;
  static constexpr std::int64_t kVocabSize = 1 << 20;

  TextEncoder(std::size_t width, std::uint64_t seed, std::size_t depth = kDefaultLayers);

  /// [CLS] followed by one id per word.
  std::vector<std::int64_t> tokenize(std::string_view text) const;
  static std::int64_t token_id(std::string_view word);

  /// +1 / -1 for words in the built-in sentiment lexicon, 0 otherwise.
  double token_polarity(std::int64_t id) const;

  LayerStack layer_stack(std::span<const std::int64_t> token_ids) const;
  EncoderOutput encode(std::span<const std::int64_t> token_ids) const;

  std::size_t width() const { return width_; }
  std::size_t depth() const { return depth_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<double> embedding(std::int64_t id) const;

  std::size_t width_;
  std::size_t depth_;
  std::uint64_t seed_;
  std::vector<std::vector<double>> token_maps_;    // per layer, d x d
  std::vector<std::vector<double>> context_maps_;  // per layer, d x d
  std::vector<std::int64_t> positive_ids_;
  std::vector<std::int64_t> negative_ids_;
};

/// Frame-level prosody projected to width d through a fixed seeded map,
/// replicated into L pseudo-layers with seeded perturbations. The pooled
/// output is the masked mean over frames.
class AudioEncoder {
 public:
  static constexpr std::size_t kFeatureCount = 8;
  static constexpr double kMinDurationSeconds = 0.2;

  AudioEncoder(std::size_t width, std::uint64_t seed, std::size_t depth = kDefaultLayers);

  /// [T x F] normalised frame features (bias, energy, voicing, pitch, ZCR,
  /// centroid, energy delta, pitch delta).
  Tensor frame_features(const std::vector<ProsodyFrame>& frames) const;

  ProjectedLayerStack layer_stack(const datagen::Waveform& wave) const;
  ProjectedLayerStack layer_stack_from_features(Tensor features) const;
  EncoderOutput encode(const datagen::Waveform& wave) const;

  const Tensor& projections() const { return projections_; }
  std::size_t width() const { return width_; }
  std::size_t depth() const { return depth_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t width_;
  std::size_t depth_;
  std::uint64_t seed_;
  Tensor projections_;  // [L x (F*d)]
};

EncoderOutput encode_text(std::span<const std::int64_t> token_ids, std::size_t width,
                          std::uint64_t seed);
EncoderOutput encode_audio(const datagen::Waveform& wave, std::size_t width, std::uint64_t seed);

}  // namespace cadd::encoders
