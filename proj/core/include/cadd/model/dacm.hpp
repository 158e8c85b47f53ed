#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadd/datagen/taxonomy.hpp"
#include "cadd/datagen/wav.hpp"
#include "cadd/encoders/encoders.hpp"
#include "cadd/model/attention.hpp"
#include "cadd/model/interaction.hpp"

namespace cadd::model {

enum class Variant { TextOnly, AudioOnly, Base, NoAttn, NoDim, Full };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
/// Ladder order: TextOnly, AudioOnly, Base, noAttn, noDIM, Full.
std::span<const Variant> all_variants();

bool uses_text(Variant v);
bool uses_audio(Variant v);

enum class AuxTarget { CaddLabel, UnimodalValence };

struct ModelConfig {
  Variant variant = Variant::Full;
  std::size_t width = encoders::kDefaultWidth;
  std::size_t heads = 4;
  std::size_t hidden = 512;
  std::size_t projection = 128;
  std::size_t text_layers = encoders::kDefaultLayers;
  std::size_t audio_layers = encoders::kDefaultLayers;
  double dropout = 0.4;
  LossWeights loss;
  AuxTarget aux_target = AuxTarget::CaddLabel;
  std::uint64_t encoder_seed = 7;

  /// Width of the classifier input for this variant.
  std::size_t head_input_width() const;
};

/// Frozen-encoder view of one sample: everything the trainable model reads.
struct EncodedSample {
  encoders::LayerStack text;  // [L x (T*d)]
  Tensor audio_features;      // [T' x F]
  Tensor audio_feature_mean;  // [F]
  std::size_t label = kCongruentLabel;
  datagen::Valence text_valence = datagen::Valence::Positive;
  datagen::Valence acoustic_valence = datagen::Valence::Positive;
};

/// Runs both frozen encoders with the configuration's width, depth and seed.
class Featurizer {
 public:
  explicit Featurizer(const ModelConfig& config);

  EncodedSample encode(std::string_view text, const datagen::Waveform& wave) const;
  EncodedSample encode_features(std::string_view text, Tensor audio_features) const;

  const encoders::TextEncoder& text_encoder() const { return text_; }
  const encoders::AudioEncoder& audio_encoder() const { return audio_; }

 private:
  encoders::TextEncoder text_;
  encoders::AudioEncoder audio_;
};

/// y = W x + b.
struct Linear {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  Tensor operator()(const Tensor& x) const;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

class Dacm {
 public:
  Dacm(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }
  std::uint64_t seed() const { return seed_; }

  /// Every trainable tensor with a stable name, in registration order. The
  /// handles share storage with the model.
  const std::vector<NamedParameter>& named_parameters() const { return params_; }
  std::vector<Tensor> parameters() const;
  const Tensor& parameter(std::string_view name) const;
  std::size_t parameter_count() const;

  /// Frozen audio encoder layer projections [L x (F*d)].
  const Tensor& audio_projections() const { return audio_projections_; }

  std::vector<ModelOutputs> forward(std::span<const EncodedSample* const> batch, bool training,
                                    std::mt19937_64& rng) const;
  ModelOutputs forward(const EncodedSample& sample) const;

  /// Composite loss for one sample under this variant's loss terms.
  Tensor loss(const EncodedSample& sample, const ModelOutputs& out,
              LossBreakdown* breakdown = nullptr) const;
  /// Mean loss over the batch as one graph.
  Tensor batch_loss(std::span<const EncodedSample* const> batch, bool training, std::mt19937_64& rng,
                    LossBreakdown* mean_breakdown = nullptr) const;

  /// Attention blocks exposed for inspection; undefined tensors in variants without attention.
  const AttentionParams& text_to_audio() const { return attn_text_audio_; }
  const AttentionParams& audio_to_text() const { return attn_audio_text_; }
  const Linear& text_aux_head() const { return aux_text_; }
  const Linear& audio_aux_head() const { return aux_audio_; }

 private:
  struct Shared;
  ModelOutputs forward_one(const EncodedSample& s, const Shared& shared, bool training,
                           std::mt19937_64& rng) const;
  void register_parameter(std::string name, const Tensor& t);
  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng,
                     bool bias = true);

  ModelConfig config_;
  std::uint64_t seed_;
  Tensor audio_projections_;
  std::vector<NamedParameter> params_;

  Tensor wlp_text_, wlp_audio_;
  Linear aux_text_, aux_audio_;
  Linear proj_text_, proj_audio_;
  AttentionParams attn_text_audio_, attn_audio_text_;
  Tensor dim_gate_;
  Linear agreement_;
  Linear mlp_hidden_, mlp_out_;
};

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_json(const Dacm& model);
Dacm checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const Dacm& model);
Dacm load_checkpoint(const std::filesystem::path& path);

}  // namespace cadd::model
