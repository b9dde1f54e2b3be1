#pragma once

#include <cstdint>
#include <vector>

#include "mvlatent/tensor.hpp"

namespace mvlatent::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam state for one flat list of parameter tensors (minimization). Moments
/// are zero-initialized and carried across steps; step_count drives the bias
/// correction.
class Adam {
 public:
  Adam(AdamConfig config, const std::vector<const Tensor*>& params);

  /// One update in place. params/grads must match the shapes given at
  /// construction, position by position.
  void step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads);

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::int64_t step_count_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace mvlatent::nn
