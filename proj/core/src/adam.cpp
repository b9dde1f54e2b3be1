#include "mvlatent/adam.hpp"

#include <cmath>

#include "mvlatent/errors.hpp"

namespace mvlatent::nn {

Adam::Adam(AdamConfig config, const std::vector<const Tensor*>& params)
    : config_(config) {
  if (config_.lr <= 0.0) throw ConfigError("adam: lr must be > 0");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 ||
      config_.beta2 < 0.0 || config_.beta2 >= 1.0) {
    throw ConfigError("adam: betas must be in [0, 1)");
  }
  if (config_.eps <= 0.0) throw ConfigError("adam: eps must be > 0");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.push_back(Tensor::zeros(p->shape));
    v_.push_back(Tensor::zeros(p->shape));
  }
}

void Adam::step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("adam: expected " + std::to_string(m_.size()) +
                         " tensors, got " + std::to_string(params.size()) +
                         " params and " + std::to_string(grads.size()) + " grads");
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(m_[i]) || !g.same_shape(m_[i])) {
      throw DimensionError("adam: tensor " + std::to_string(i) +
                           " shape changed since construction");
    }
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < p.numel(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace mvlatent::nn
