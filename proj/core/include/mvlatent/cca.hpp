#pragma once

#include <cstddef>
#include <vector>

#include "mvlatent/tensor.hpp"

namespace mvlatent::cca {

using nn::Tensor;

/// Classical linear CCA solution. Columns of proj_x / proj_y are paired
/// canonical directions; apply as (x - mean_x)^T proj_x.
struct CcaResult {
  Tensor proj_x;             // [d_x, k]
  Tensor proj_y;             // [d_y, k]
  Tensor mean_x;             // [d_x]
  Tensor mean_y;             // [d_y]
  std::vector<double> correlations;  // k values in [0,1], non-increasing
  double regularization = 0.0;
};

/// Regularized linear CCA via whitening + SVD of the cross-covariance.
/// X is [N, d_x], Y is [N, d_y], rows paired. Sign convention: each proj_x
/// column has its largest-magnitude entry positive; proj_y columns are
/// flipped in tandem so projected cross-covariances stay positive.
/// Throws NumericError on a singular view covariance when reg == 0.
CcaResult linear_cca(const Tensor& X, const Tensor& Y, std::size_t k, double reg = 1e-4);

/// Maximum-likelihood probabilistic CCA (latent linear-Gaussian model).
/// post_x / post_y are the posterior-mean maps: E[z|x] = post_x^T (x - mean_x).
/// Their columns span the same subspaces as linear CCA's projections.
struct PccaResult {
  Tensor load_x;   // [d_x, k] loadings W_x
  Tensor load_y;   // [d_y, k]
  Tensor noise_x;  // [d_x, d_x] residual covariance Psi_x
  Tensor noise_y;  // [d_y, d_y]
  Tensor post_x;   // [d_x, k]
  Tensor post_y;   // [d_y, k]
  Tensor mean_x;   // [d_x]
  Tensor mean_y;   // [d_y]
  std::vector<double> correlations;
};

PccaResult pcca_ml(const Tensor& X, const Tensor& Y, std::size_t k, double reg = 1e-4);

/// Principal angles (radians, ascending, in [0, pi/2]) between the column
/// spaces of U [d, p] and V [d, q]. Throws on rank-deficient input.
std::vector<double> principal_angles(const Tensor& U, const Tensor& V);

/// Project samples: rows of X [N, d] -> rows of output [N, k] via
/// (x - mean)^T P.
Tensor project(const Tensor& X, const Tensor& P, const Tensor& mean);

}  // namespace mvlatent::cca
