#include "cadd/numeric/optim.hpp"

#include <cmath>

#include "cadd/errors.hpp"

namespace cadd::numeric {

OptimizerState OptimizerState::for_params(std::span<const Tensor> params, AdamWConfig config) {
  if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
  OptimizerState s;
  s.config = config;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.size(), 0.0);
    s.second_moment.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adamw_step(std::span<Tensor> params, OptimizerState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adamw_step: parameter count differs from optimizer state");
  }
  const auto& cfg = state.config;
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
  ++state.step;
  const auto [b1, b2] = cfg.betas;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias2 = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != p.size() || p.grad().size() != p.size()) {
      throw ShapeError("adamw_step: moment/grad shape mismatch for parameter " +
                       std::to_string(k));
    }
    auto values = p.values_mut();
    auto grad = p.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      values[i] -= cfg.lr * cfg.weight_decay * values[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      values[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& p : params)
      for (auto& g : p.grad_mut()) g *= scale;
  }
  return norm;
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace cadd::numeric
