#pragma once

#include "mvlatent/gaussian.hpp"
#include "mvlatent/graph.hpp"

namespace mvlatent::nn {

/// Batched, differentiable counterparts of the scalar Gaussian operations.
/// All take [N, d] mean / log-variance nodes and reduce per row.

/// Per-row KL( N(mean_i, diag exp(log_var_i)) || N(0, I) ) -> [N, 1].
Value kl_to_standard_rows(Value mean, Value log_var);

/// Per-row KL against per-row constant priors ([N, d] tensors) -> [N, 1].
/// The prior is data, not a parameter: no gradients flow into it.
Value kl_to_const_rows(Value mean, Value log_var, const Tensor& prior_mean,
                       const Tensor& prior_log_var);

/// Per-row log N(x_i; mean_i, sigma^2 I) -> [N, 1]; x is fixed data.
Value gaussian_loglik_rows(const Tensor& x, Value mean, double sigma);

/// mean + exp(0.5 log_var) * eps -> [N, d]; eps is a fixed draw.
Value reparameterize_rows(Value mean, Value log_var, const Tensor& eps);

}  // namespace mvlatent::nn
