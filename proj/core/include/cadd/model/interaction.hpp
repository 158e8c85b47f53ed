#pragma once

#include <cstddef>

#include "cadd/numeric/tensor.hpp"

namespace cadd::model {

using numeric::Tensor;

inline constexpr std::size_t kClassCount = 3;
inline constexpr std::size_t kCongruentLabel = 2;

struct DimFeatures {
  Tensor g;         // [d] gated difference
  Tensor m;         // [d] Hadamard product
  Tensor s;         // scalar cosine
  Tensor d_logits;  // [3], detached
  Tensor f;         // [2d + 4]
  double mismatch = 0.0;
};

/// (1 - s) / 2.
constexpr double mismatch_score(double cosine) { return (1.0 - cosine) / 2.0; }

/// Width of f for encoder width d.
constexpr std::size_t interaction_width(std::size_t d) { return 2 * d + 1 + kClassCount; }

/// w_gate is [d x 2d]. The unimodal logits enter only through stop_gradient.
DimFeatures dim_forward(const Tensor& h_t, const Tensor& h_a, const Tensor& text_logits,
                        const Tensor& audio_logits, const Tensor& w_gate);

struct LossWeights {
  double ce = 1.0;
  double margin = 0.3;
  double aux_text = 0.2;
  double aux_audio = 0.2;
  double agreement = 0.1;
  double epsilon = 0.1;
  double margin_m = 0.0;
};

/// Congruent: 1 - cos. Dissonant: max(0, cos - margin_m). Inputs must be unit
/// vectors to within 1e-6.
Tensor margin_loss(const Tensor& z_t, const Tensor& z_a, std::size_t label, double margin_m);

/// Heads produced by one forward pass. Heads a variant lacks stay undefined
/// and contribute nothing to the composite loss.
struct ModelOutputs {
  Tensor class_logits;
  Tensor text_aux_logits;
  Tensor audio_aux_logits;
  Tensor agreement_logit;
  Tensor z_t, z_a;
  double mismatch = 0.5;
};

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double margin = 0.0;
  double aux_text = 0.0;
  double aux_audio = 0.0;
  double agreement = 0.0;
};

/// Aux heads are trained against `aux_text_label` / `aux_audio_label`, which
/// are the CADD label unless the caller chooses otherwise.
Tensor composite_loss(const ModelOutputs& out, std::size_t label, const LossWeights& weights,
                      LossBreakdown* breakdown = nullptr);
Tensor composite_loss(const ModelOutputs& out, std::size_t label, std::size_t aux_text_label,
                      std::size_t aux_audio_label, const LossWeights& weights,
                      LossBreakdown* breakdown = nullptr);

}  // namespace cadd::model
