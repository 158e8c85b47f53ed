#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cadd/numeric/tensor.hpp"

namespace cadd::numeric {

struct AdamWConfig {
  double lr = 5e-4;
  std::pair<double, double> betas{0.9, 0.999};
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Moment accumulators for one parameter list, in the same order.
struct OptimizerState {
  AdamWConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_params(std::span<const Tensor> params, AdamWConfig config);
};

/// One decoupled-weight-decay Adam update using each parameter's accumulated grad.
void adamw_step(std::span<Tensor> params, OptimizerState& state);

/// Rescales all grads so their joint L2 norm is at most max_norm. Returns the
/// norm measured before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

void zero_grads(std::span<Tensor> params);

}  // namespace cadd::numeric
