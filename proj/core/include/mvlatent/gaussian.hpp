#pragma once

#include <vector>

#include "mvlatent/rng.hpp"
#include "mvlatent/tensor.hpp"

namespace mvlatent::nn {

/// Diagonal Gaussian over a d-dimensional space, parameterized by mean and
/// per-dimension log variance (unconstrained for optimization).
struct DiagGaussian {
  Tensor mean;
  Tensor log_var;

  DiagGaussian() = default;
  /// Throws DimensionError on a length mismatch.
  DiagGaussian(Tensor mean_, Tensor log_var_);
  /// Same, with log_var clamped to [-10, 10] and non-finite values rejected.
  static DiagGaussian checked(Tensor mean, Tensor log_var);

  std::size_t dim() const { return mean.numel(); }
  static DiagGaussian standard(std::size_t d);
};

/// Exact closed-form KL(q || p) between diagonal Gaussians, summed over
/// dimensions. Always >= 0; 0 iff q == p elementwise.
double kl_divergence(const DiagGaussian& q, const DiagGaussian& p);

/// Log density of N(mean, sigma^2 I) at x, normalization constant included.
double log_pdf_isotropic(const Tensor& x, const Tensor& mean, double sigma);

/// mean + exp(0.5 log_var) * eps, elementwise.
Tensor reparameterize(const DiagGaussian& q, const Tensor& eps);

/// d independent N(0,1) draws; d >= 1.
Tensor standard_normal(Rng& rng, std::size_t d);

}  // namespace mvlatent::nn
