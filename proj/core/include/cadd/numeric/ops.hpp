#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "cadd/numeric/tensor.hpp"

namespace cadd::numeric {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// scale * x + shift, elementwise.
Tensor affine(const Tensor& x, double scale, double shift = 0.0);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);

/// Matrix product for ranks (2,2), (2,1) and (1,2).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& x, Shape shape);
/// Concatenates the flattened inputs into one vector.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
/// Elements [begin, end) of the flattened input.
Tensor slice(const Tensor& x, std::size_t begin, std::size_t end);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor dot(const Tensor& u, const Tensor& v);

Tensor softmax(const Tensor& x, std::size_t axis);
/// Softmax along `axis` restricted to positions where mask is true; masked
/// positions produce exactly 0 and receive no gradient.
Tensor masked_softmax(const Tensor& x, std::size_t axis, const std::vector<bool>& mask);
Tensor log_softmax(const Tensor& x);

/// Mean over the rows of a [T x d] matrix where mask[t] is true.
Tensor masked_mean_rows(const Tensor& x, const std::vector<bool>& mask);

/// Cosine of the angle between two equal-length vectors. Defined as 0 (with
/// zero gradient) when either norm is below 1e-12.
Tensor cosine_similarity(const Tensor& u, const Tensor& v);
inline constexpr double kCosineNormFloor = 1e-12;
Tensor l2_normalize(const Tensor& x);

/// Values of x, detached from the graph: nothing propagates through this node.
Tensor stop_gradient(const Tensor& x);

/// Inverted dropout. Identity when `training` is false or rate is 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training);

/// Cross-entropy against a label-smoothed target placing 1-eps+eps/C on the
/// true class and eps/C elsewhere.
Tensor cross_entropy_smoothed(const Tensor& logits, std::size_t label, double epsilon);
/// Binary cross-entropy on a single logit, target in [0, 1].
Tensor bce_with_logits(const Tensor& logit, double target);

// Multi-head plumbing for single-query attention.
/// [d] -> [heads x d]; row h keeps only head h's block of the input.
Tensor spread_heads(const Tensor& q, std::size_t heads);
/// [heads x d] -> [d]; element j is taken from the row owning j's head block.
Tensor collect_heads(const Tensor& m, std::size_t heads);

}  // namespace cadd::numeric
