#include "cadd/model/attention.hpp"

#include <cmath>

#include "cadd/errors.hpp"
#include "cadd/numeric/ops.hpp"

namespace cadd::model {

namespace ops = numeric;

AttentionParams AttentionParams::init(std::size_t width, std::size_t heads, std::mt19937_64& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(width) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(2 * width));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto make = [&] {
    std::vector<double> v(width * width);
    for (auto& x : v) x = dist(rng);
    return Tensor({width, width}, std::move(v), true);
  };
  AttentionParams p;
  p.w_q = make();
  p.w_k = make();
  p.w_v = make();
  p.w_o = make();
  p.heads = heads;
  return p;
}

namespace {

void check_query(const Tensor& query, const AttentionParams& params) {
  if (query.rank() != 1 || query.size() != params.width()) {
    throw ShapeError("attention query must be a vector of width " + std::to_string(params.width()));
  }
}

// Row h of the result is W_K,h^T q_h: the head-h query pulled back through the
// key map, so that scores = keys_values * result^T.
Tensor key_space_queries(const Tensor& query, const AttentionParams& params) {
  const auto q = ops::matmul(params.w_q, query);
  return ops::matmul(ops::spread_heads(q, params.heads), params.w_k);
}

double score_scale(const AttentionParams& params) {
  return 1.0 / std::sqrt(static_cast<double>(params.width() / params.heads));
}

// mixed: [heads x d], row h = attention-weighted mean of the sequence for head h.
Tensor finish(const Tensor& mixed, const AttentionParams& params) {
  const auto values = ops::matmul(mixed, ops::transpose(params.w_v));
  return ops::matmul(params.w_o, ops::collect_heads(values, params.heads));
}

}  // namespace

Tensor asymmetric_cross_attention(const Tensor& query_pooled, const Tensor& keys_values,
                                  const std::vector<bool>& mask, const AttentionParams& params) {
  check_query(query_pooled, params);
  if (keys_values.rank() != 2 || keys_values.dim(1) != params.width() || keys_values.dim(0) == 0) {
    throw ShapeError("keys/values must be [T' x d] with T' >= 1, got " +
                     numeric::shape_string(keys_values.shape()));
  }
  const auto q_keys = key_space_queries(query_pooled, params);
  const auto scores = ops::affine(ops::matmul(keys_values, ops::transpose(q_keys)), score_scale(params));
  const auto weights = ops::masked_softmax(scores, 0, mask);  // [T' x heads]
  return finish(ops::matmul(ops::transpose(weights), keys_values), params);
}

Tensor asymmetric_cross_attention(const Tensor& query_pooled, const Tensor& features,
                                  const Tensor& projection, const std::vector<bool>& mask,
                                  const AttentionParams& params) {
  check_query(query_pooled, params);
  if (features.rank() != 2 || projection.rank() != 2 || features.dim(1) != projection.dim(0) ||
      projection.dim(1) != params.width() || features.dim(0) == 0) {
    throw ShapeError("factored sequence must be [T' x F] * [F x d]");
  }
  const auto q_keys = key_space_queries(query_pooled, params);
  const auto q_features = ops::matmul(projection, ops::transpose(q_keys));  // [F x heads]
  const auto scores = ops::affine(ops::matmul(features, q_features), score_scale(params));
  const auto weights = ops::masked_softmax(scores, 0, mask);
  const auto mixed_features = ops::matmul(ops::transpose(weights), features);  // [heads x F]
  return finish(ops::matmul(mixed_features, projection), params);
}

Tensor pooled_fusion_baseline(const Tensor& h_t, const Tensor& h_a) {
  if (h_t.rank() != 1 || h_t.shape() != h_a.shape()) {
    throw ShapeError("pooled fusion needs equal-width vectors, got " +
                     numeric::shape_string(h_t.shape()) + " and " + numeric::shape_string(h_a.shape()));
  }
  return ops::concat({ops::sub(h_t, h_a), ops::mul(h_t, h_a)});
}

}  // namespace cadd::model
