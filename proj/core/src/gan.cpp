#include "mvlatent/gan.hpp"

#include <string>

#include "mvlatent/errors.hpp"
#include "mvlatent/tensor_ops.hpp"

namespace mvlatent::model {
namespace {

using nn::ops::add_scalar;
using nn::ops::log_clamped;
using nn::ops::mean_all;
using nn::ops::neg;
using nn::ops::scale;
using nn::ops::sigmoid;

constexpr double kLogFloor = 1e-12;

}  // namespace

nn::Mlp make_discriminator(const DiscArch& arch, Rng& rng) {
  if (arch.input == 0)
    throw ConfigError("discriminator: input width must be positive");
  MlpSpec spec;
  spec.layer_widths.push_back(static_cast<int>(arch.input));
  for (int h : arch.hidden) spec.layer_widths.push_back(h);
  spec.layer_widths.push_back(1);  // a single logit; probability = sigmoid
  spec.activation = nn::Activation::relu;
  spec.dropout_rate = arch.dropout_rate;
  spec.output_heads = nn::OutputHead::single;
  return nn::make_mlp(spec, rng);
}

void validate(const GanConfig& config, std::size_t input_x, std::size_t input_y) {
  if (config.lambda1 < 0.0 || config.lambda2 < 0.0)
    throw ConfigError("gan: lambda weights must be non-negative");
  if (config.disc_minibatch == 0)
    throw ConfigError("gan: disc_minibatch must be at least 1");
  if (config.disc_update_period == 0)
    throw ConfigError("gan: disc_update_period must be at least 1");
  auto check_disc = [](const MlpSpec& spec, const ParamSet& params,
                       std::size_t input, const std::string& name) {
    nn::validate(spec);
    if (spec.output_heads != nn::OutputHead::single || spec.output_width() != 1)
      throw ConfigError("gan: " + name + " must emit a single logit");
    if (spec.input_width() != static_cast<int>(input))
      throw ConfigError("gan: " + name + " consumes width " +
                        std::to_string(spec.input_width()) + ", view has width " +
                        std::to_string(input));
    const auto layout = nn::param_layout(spec);
    if (layout.size() != params.size())
      throw ConfigError("gan: " + name + " parameter count mismatch");
  };
  check_disc(config.disc_x_spec, config.disc_x, input_x, "disc_x");
  check_disc(config.disc_y_spec, config.disc_y, input_y, "disc_y");
}

Tensor disc_prob(const MlpSpec& spec, const ParamSet& params, const Tensor& v) {
  return nn::t_sigmoid(nn::forward_mlp(spec, params, v).first);
}

Value build_disc_loss(Graph& g, const MlpSpec& spec,
                      const std::vector<Value>& disc_params, const Tensor& real,
                      const Tensor& recon,
                      const std::vector<Tensor>* dropout_masks) {
  if (real.rank() != 2 || recon.rank() != 2 || real.cols() != recon.cols())
    throw DimensionError("discriminator loss: real and reconstructed batches "
                         "must share their width");
  Value real_in = g.constant(real, "disc_real");
  Value recon_in = g.constant(recon, "disc_recon");
  Value p_real = sigmoid(
      nn::apply_mlp(g, spec, disc_params, real_in, dropout_masks).first);
  Value p_recon = sigmoid(
      nn::apply_mlp(g, spec, disc_params, recon_in, dropout_masks).first);
  // -E[log D(real) + log(1 - D(recon))], the maximization objective negated.
  Value log_real = log_clamped(p_real, kLogFloor);
  Value log_not_recon = log_clamped(add_scalar(neg(p_recon), 1.0), kLogFloor);
  return neg(mean_all(log_real + log_not_recon));
}

double discriminator_loss(const MlpSpec& spec, const ParamSet& params,
                          const Tensor& real, const Tensor& recon) {
  Graph g;
  std::vector<Value> leaves = nn::bind_params(g, params, /*frozen=*/true);
  Value loss = build_disc_loss(g, spec, leaves, real, recon);
  return g.scalar(loss);
}

Value build_frozen_log_d(Graph& g, const MlpSpec& spec, const ParamSet& params,
                         Value recon) {
  std::vector<Value> frozen = nn::bind_params(g, params, /*frozen=*/true);
  Value p = sigmoid(nn::apply_mlp(g, spec, frozen, recon).first);
  return mean_all(log_clamped(p, kLogFloor));
}

Value build_generator_loss(Graph& g, const ElboNodes& nodes, const GanConfig& gan) {
  Value objective = nodes.elbo;
  if (gan.lambda1 > 0.0) {
    Value log_d1 = build_frozen_log_d(g, gan.disc_x_spec, gan.disc_x, nodes.recon_x);
    objective = objective + scale(log_d1, gan.lambda1);
  }
  if (gan.lambda2 > 0.0) {
    Value log_d2 = build_frozen_log_d(g, gan.disc_y_spec, gan.disc_y, nodes.recon_y);
    objective = objective + scale(log_d2, gan.lambda2);
  }
  return neg(objective);
}

double generator_loss(const VccapModel& model, const GanConfig& gan, const Tensor& x,
                      const Tensor& y, const ElboDraws& draws,
                      const ElboWeights& weights, const PriorBatch& prior) {
  Graph g;
  BoundParams params = bind_vccap(g, model, /*frozen=*/true);
  ElboNodes nodes = build_elbo(g, model, params, x, y, draws, weights, prior);
  Value loss = build_generator_loss(g, nodes, gan);
  return g.scalar(loss);
}

}  // namespace mvlatent::model
