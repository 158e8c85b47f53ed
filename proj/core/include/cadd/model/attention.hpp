#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "cadd/numeric/tensor.hpp"

namespace cadd::model {

using numeric::Tensor;

/// Bias-free multi-head projections for a single-query attention block.
struct AttentionParams {
  Tensor w_q, w_k, w_v, w_o;  // each [d x d]
  std::size_t heads = 1;

  std::size_t width() const { return w_q.dim(0); }
  /// Xavier-uniform initialisation; throws ConfigError unless heads divides d.
  static AttentionParams init(std::size_t width, std::size_t heads, std::mt19937_64& rng);
};

/// One query vector attends over the rows of `keys_values` [T' x d].
/// Scores per head are scaled dot products, softmax runs over valid rows only.
Tensor asymmetric_cross_attention(const Tensor& query_pooled, const Tensor& keys_values,
                                  const std::vector<bool>& mask, const AttentionParams& params);

/// Same block for a sequence stored as features [T' x F] times projection
/// [F x d]. Equal to the dense form on features * projection, without
/// materialising the product.
Tensor asymmetric_cross_attention(const Tensor& query_pooled, const Tensor& features,
                                  const Tensor& projection, const std::vector<bool>& mask,
                                  const AttentionParams& params);

/// [h_t - h_a ; h_t * h_a].
Tensor pooled_fusion_baseline(const Tensor& h_t, const Tensor& h_a);

}  // namespace cadd::model
