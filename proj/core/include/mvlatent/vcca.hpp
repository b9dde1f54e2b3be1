#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvlatent/gaussian.hpp"
#include "mvlatent/graph.hpp"
#include "mvlatent/mlp.hpp"
#include "mvlatent/rng.hpp"
#include "mvlatent/tensor.hpp"

namespace mvlatent::model {

using nn::Graph;
using nn::MlpSpec;
using nn::ParamSet;
using nn::Rng;
using nn::Tensor;
using nn::Value;

/// Shared-latent generative model: q(z|x) is a Gaussian encoder (mean and
/// log-variance heads), the decoders emit the means of isotropic Gaussians
/// over each view with fixed standard deviations sigma_x and sigma_y.
struct VccaModel {
  MlpSpec encoder_z_spec;
  ParamSet encoder_z;
  MlpSpec decoder_x_spec;
  ParamSet decoder_x;
  MlpSpec decoder_y_spec;
  ParamSet decoder_y;
  double sigma_x = 1.0;
  double sigma_y = 0.1;
  std::size_t z_dim = 70;
};

/// Adds view-specific private channels q(h_x|x) and q(h_y|y); each decoder
/// consumes [z, h] in that order. hx_dim or hy_dim of zero disables that
/// channel entirely (its encoder stays empty), which reduces the model to
/// the plain shared-only objective bit for bit.
struct VccapModel : VccaModel {
  MlpSpec encoder_hx_spec;
  ParamSet encoder_hx;
  MlpSpec encoder_hy_spec;
  ParamSet encoder_hy;
  std::size_t hx_dim = 0;
  std::size_t hy_dim = 0;
};

/// Architecture knobs for building fresh models.
struct ArchConfig {
  std::size_t input_x = 0;  // d_x * W
  std::size_t input_y = 0;  // d_y * W
  std::size_t z_dim = 70;
  std::size_t hx_dim = 0;
  std::size_t hy_dim = 0;
  std::vector<int> shared_hidden = {1500, 1500, 1500};    // q(z|x) hidden widths
  std::vector<int> private_hidden = {1024, 1024, 1024};   // q(h|.) hidden widths
  std::vector<int> decoder_hidden = {1500, 1500, 1500};
  double sigma_x = 1.0;
  double sigma_y = 0.1;
  double dropout_rate = 0.2;
  nn::Activation activation = nn::Activation::relu;
};

/// Initializes parameters in canonical order (encoder_z, encoder_hx,
/// encoder_hy, decoder_x, decoder_y) from the single rng; disabled private
/// channels consume no draws, so a private-free build and a plain build
/// draw identical weight streams.
VccapModel make_vccap(const ArchConfig& config, Rng& rng);
VccaModel make_vcca(const ArchConfig& config, Rng& rng);

/// Throws ConfigError / DimensionError when specs and parameter sets are
/// inconsistent (head kinds, widths, missing tensors).
void validate_model(const VccapModel& model);

/// Canonical parameter enumeration of the whole model: net by net in the
/// order encoder_z, encoder_hx, encoder_hy, decoder_x, decoder_y; inside a
/// net, the ParamSet insertion order. This order is shared by the trainer,
/// gradient checks, and checkpoints.
std::vector<Tensor*> param_tensors(VccapModel& model);
std::vector<const Tensor*> param_tensors(const VccapModel& model);
std::vector<std::string> param_names(const VccapModel& model);  // "encoder_z.w0"

/// Graph leaves for every parameter, in canonical order per net.
struct BoundParams {
  std::vector<Value> encoder_z, encoder_hx, encoder_hy, decoder_x, decoder_y;
  std::vector<Value> flat() const;
};

BoundParams bind_vccap(Graph& g, const VccapModel& model, bool frozen = false);

/// Regroup an externally created flat leaf vector (canonical order) into the
/// per-net structure; used when a harness owns the leaves.
BoundParams split_params(const VccapModel& model, const std::vector<Value>& flat);

/// Monte Carlo noise for one minibatch: mc_samples tensors of shape
/// [n, dim] per active latent channel. Draw order per sample: z, hx, hy.
struct ElboDraws {
  std::vector<Tensor> eps_z;
  std::vector<Tensor> eps_hx;  // empty when hx_dim == 0
  std::vector<Tensor> eps_hy;  // empty when hy_dim == 0
};

ElboDraws make_draws(const VccapModel& model, std::size_t n, std::size_t mc_samples,
                     Rng& rng);

/// Dropout masks for one training step, one mask per hidden layer per net,
/// generated in canonical net order. Rate-zero specs produce all-ones masks
/// without consuming randomness.
struct VccapMasks {
  std::vector<Tensor> encoder_z, encoder_hx, encoder_hy, decoder_x, decoder_y;
};

VccapMasks make_masks(const VccapModel& model, std::size_t n, Rng& rng);

/// Per-sample prior parameters for a batch. Empty tensors mean the standard
/// N(0, I) prior; otherwise both are [n, z_dim] constants (no gradients).
struct PriorBatch {
  Tensor mean;
  Tensor log_var;
  bool standard() const { return mean.rank() == 0; }
};

/// KL weights; the single config beta sets all three by default.
struct ElboWeights {
  double beta_z = 1.0;
  double beta_hx = 1.0;
  double beta_hy = 1.0;
};

/// Graph nodes of the objective. elbo is the minibatch mean of the
/// per-sample lower bound with the KL weights applied; the kl_* and rec_*
/// scalars are unweighted term means for reporting. recon_x / recon_y are
/// the decoder means of the first Monte Carlo draw, exposed for adversarial
/// training. kl_hx / kl_hy are invalid() when the channel is disabled.
struct ElboNodes {
  Value elbo;
  Value kl_z, kl_hx, kl_hy;
  Value rec_x, rec_y;
  Value recon_x, recon_y;
};

/// Builds the full objective on g. x [n, input_x] and y [n, input_y] enter
/// as constants; dropout masks are optional (evaluation passes none).
ElboNodes build_elbo(Graph& g, const VccapModel& model, const BoundParams& params,
                     const Tensor& x, const Tensor& y, const ElboDraws& draws,
                     const ElboWeights& weights, const PriorBatch& prior,
                     const VccapMasks* masks = nullptr);

/// Numeric term values; elbo carries the KL weights, the terms are raw.
struct ElboBreakdown {
  double elbo = 0.0;
  double kl_z = 0.0, kl_hx = 0.0, kl_hy = 0.0;
  double rec_x = 0.0, rec_y = 0.0;
};

ElboBreakdown elbo_vccap(const VccapModel& model, const Tensor& x, const Tensor& y,
                         const ElboDraws& draws, const ElboWeights& weights,
                         const PriorBatch& prior = {});

/// The shared-only bound: the private-free special case of elbo_vccap,
/// evaluated through the identical code path.
ElboBreakdown elbo_vcca(const VccaModel& model, const Tensor& x, const Tensor& y,
                        const std::vector<Tensor>& eps_z, double beta,
                        const PriorBatch& prior = {});

/// Learned features: the mean head of q(z|x). Pure per-row function — no
/// dropout, no sampling, no minibatch coupling.
Tensor encode_features(const VccaModel& model, const Tensor& x);

/// Decoder-mean reconstructions of both views from the first Monte Carlo
/// draw, computed numerically without dropout (the adversarial training
/// target).
struct Reconstructions {
  Tensor x;
  Tensor y;
};

Reconstructions reconstruct_views(const VccapModel& model, const Tensor& x,
                                  const Tensor& y, const ElboDraws& draws);

}  // namespace mvlatent::model
