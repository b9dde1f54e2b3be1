#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mvlatent/graph.hpp"
#include "mvlatent/tensor.hpp"

namespace mvlatent::nn {

/// Builds a scalar loss over the given parameter leaves. The builder is
/// invoked once per evaluation on a fresh graph, so it must be a pure
/// function of the parameter tensors (fix any noise/dropout draws outside).
using LossBuilder = std::function<Value(Graph&, const std::vector<Value>&)>;

struct GradCheckConfig {
  double perturbation = 1e-5;
  /// Coordinates checked per parameter tensor; 0 = every coordinate.
  /// Subsets are sampled without replacement, seeded.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked_coords = 0;
  std::string worst_coord;  // "param_index[flat_index]" of the worst offender
};

/// Compare reverse-mode gradients against central finite differences.
/// Relative error per coordinate: |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check(const LossBuilder& build, const std::vector<Tensor>& params,
                           const GradCheckConfig& config = {});

}  // namespace mvlatent::nn
