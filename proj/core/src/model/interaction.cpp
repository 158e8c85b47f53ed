#include "cadd/model/interaction.hpp"

#include <cmath>

#include "cadd/errors.hpp"
#include "cadd/numeric/ops.hpp"

namespace cadd::model {

namespace ops = numeric;

DimFeatures dim_forward(const Tensor& h_t, const Tensor& h_a, const Tensor& text_logits,
                        const Tensor& audio_logits, const Tensor& w_gate) {
  if (h_t.rank() != 1 || h_t.shape() != h_a.shape()) {
    throw ShapeError("interaction inputs must be equal-width vectors");
  }
  const std::size_t d = h_t.size();
  if (w_gate.rank() != 2 || w_gate.dim(0) != d || w_gate.dim(1) != 2 * d) {
    throw ShapeError("gate must be [d x 2d], got " + numeric::shape_string(w_gate.shape()));
  }
  if (text_logits.size() != kClassCount || audio_logits.size() != kClassCount) {
    throw ShapeError("unimodal logits must have 3 entries");
  }
  DimFeatures out;
  const auto gate = ops::sigmoid(ops::matmul(w_gate, ops::concat({h_t, h_a})));
  out.g = ops::mul(gate, ops::sub(h_t, h_a));
  out.m = ops::mul(h_t, h_a);
  out.s = ops::cosine_similarity(h_t, h_a);
  out.d_logits = ops::sub(ops::stop_gradient(text_logits), ops::stop_gradient(audio_logits));
  out.f = ops::concat({out.g, out.m, out.s, out.d_logits});
  out.mismatch = mismatch_score(out.s.item());
  return out;
}

Tensor margin_loss(const Tensor& z_t, const Tensor& z_a, std::size_t label, double margin_m) {
  for (const Tensor* z : {&z_t, &z_a}) {
    double sq = 0.0;
    for (double v : z->values()) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) throw ValidationError("margin_loss expects unit vectors");
  }
  if (label >= kClassCount) throw IndexError("label out of range");
  const auto cos = ops::dot(z_t, z_a);
  if (label == kCongruentLabel) return ops::affine(cos, -1.0, 1.0);
  return ops::relu(ops::affine(cos, 1.0, -margin_m));
}

Tensor composite_loss(const ModelOutputs& out, std::size_t label, const LossWeights& weights,
                      LossBreakdown* breakdown) {
  return composite_loss(out, label, label, label, weights, breakdown);
}

Tensor composite_loss(const ModelOutputs& out, std::size_t label, std::size_t aux_text_label,
                      std::size_t aux_audio_label, const LossWeights& weights,
                      LossBreakdown* breakdown) {
  if (label >= kClassCount) throw IndexError("label out of range");
  LossBreakdown parts;
  const auto ce = ops::cross_entropy_smoothed(out.class_logits, label, weights.epsilon);
  parts.ce = ce.item();
  auto total = ops::affine(ce, weights.ce);
  auto add_term = [&](const Tensor& term, double w, double& slot) {
    slot = term.item();
    if (w != 0.0) total = ops::add(total, ops::affine(term, w));
  };
  if (out.z_t.defined() && out.z_a.defined()) {
    add_term(margin_loss(out.z_t, out.z_a, label, weights.margin_m), weights.margin, parts.margin);
  }
  if (out.text_aux_logits.defined()) {
    add_term(ops::cross_entropy_smoothed(out.text_aux_logits, aux_text_label, weights.epsilon),
             weights.aux_text, parts.aux_text);
  }
  if (out.audio_aux_logits.defined()) {
    add_term(ops::cross_entropy_smoothed(out.audio_aux_logits, aux_audio_label, weights.epsilon),
             weights.aux_audio, parts.aux_audio);
  }
  if (out.agreement_logit.defined()) {
    add_term(ops::bce_with_logits(out.agreement_logit, label == kCongruentLabel ? 1.0 : 0.0),
             weights.agreement, parts.agreement);
  }
  parts.total = total.item();
  if (breakdown) *breakdown = parts;
  return total;
}

}  // namespace cadd::model
