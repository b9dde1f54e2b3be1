#pragma once

#include <cstdint>

#include "mvlatent/vcca.hpp"

namespace mvlatent::model {

/// Adversarial extension: one discriminator per view scores samples as real
/// data versus model reconstructions. Each discriminator is an MLP whose
/// single output is a logit; the probability is sigmoid(logit), kept inside
/// (0, 1), and all log terms are clamped at 1e-12.
struct GanConfig {
  MlpSpec disc_x_spec;
  ParamSet disc_x;
  MlpSpec disc_y_spec;
  ParamSet disc_y;
  double lambda1 = 5.0;  // weight of log D1(x') in the generator objective
  double lambda2 = 5.0;  // weight of log D2(y')
  std::size_t disc_minibatch = 1800;
  std::size_t disc_update_period = 9;  // generator steps per discriminator step
};

/// Discriminator architecture for one view.
struct DiscArch {
  std::size_t input = 0;
  std::vector<int> hidden = {2048, 1500, 1500};
  double dropout_rate = 0.2;
};

nn::Mlp make_discriminator(const DiscArch& arch, Rng& rng);

/// Throws ConfigError on inconsistent specs/params or negative weights.
void validate(const GanConfig& config, std::size_t input_x, std::size_t input_y);

/// Discriminator probabilities D(v) for a batch, numeric pass -> [n, 1].
Tensor disc_prob(const MlpSpec& spec, const ParamSet& params, const Tensor& v);

/// Builds the discriminator training loss on g with trainable discriminator
/// leaves: mean over the batch of -[log D(real) + log(1 - D(recon))].
/// Reconstructions enter as constants - no gradient reaches the generator.
Value build_disc_loss(Graph& g, const MlpSpec& spec,
                      const std::vector<Value>& disc_params, const Tensor& real,
                      const Tensor& recon,
                      const std::vector<Tensor>* dropout_masks = nullptr);

/// Numeric value of the discriminator loss (evaluation path).
double discriminator_loss(const MlpSpec& spec, const ParamSet& params,
                          const Tensor& real, const Tensor& recon);

/// Mean log D(recon) with the discriminator parameters frozen as constants;
/// recon is a live graph node, so gradients flow into the generator only.
Value build_frozen_log_d(Graph& g, const MlpSpec& spec, const ParamSet& params,
                         Value recon);

/// Generator objective node: -(elbo + lambda1 mean log D1(x') +
/// lambda2 mean log D2(y')), minimized over generator parameters.
Value build_generator_loss(Graph& g, const ElboNodes& nodes, const GanConfig& gan);

/// Numeric generator loss for a whole forward pass (evaluation path).
double generator_loss(const VccapModel& model, const GanConfig& gan, const Tensor& x,
                      const Tensor& y, const ElboDraws& draws,
                      const ElboWeights& weights, const PriorBatch& prior = {});

}  // namespace mvlatent::model
