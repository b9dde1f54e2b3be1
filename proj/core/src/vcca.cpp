#include "mvlatent/vcca.hpp"

#include <cmath>
#include <utility>

#include "mvlatent/errors.hpp"
#include "mvlatent/gaussian_graph.hpp"
#include "mvlatent/tensor_ops.hpp"

namespace mvlatent::model {
namespace {

using nn::ops::concat_cols;
using nn::ops::mean_all;
using nn::ops::scale;

MlpSpec encoder_spec(std::size_t input, const std::vector<int>& hidden,
                     std::size_t out, double dropout, nn::Activation act) {
  MlpSpec spec;
  spec.layer_widths.push_back(static_cast<int>(input));
  for (int h : hidden) spec.layer_widths.push_back(h);
  spec.layer_widths.push_back(static_cast<int>(out));
  spec.activation = act;
  spec.dropout_rate = dropout;
  spec.output_heads = nn::OutputHead::mean_and_logvar;
  return spec;
}

MlpSpec decoder_spec(std::size_t input, const std::vector<int>& hidden,
                     std::size_t out, double dropout, nn::Activation act) {
  MlpSpec spec;
  spec.layer_widths.push_back(static_cast<int>(input));
  for (int h : hidden) spec.layer_widths.push_back(h);
  spec.layer_widths.push_back(static_cast<int>(out));
  spec.activation = act;
  spec.dropout_rate = dropout;
  spec.output_heads = nn::OutputHead::single;
  return spec;
}

void check_arch(const ArchConfig& config) {
  if (config.input_x == 0 || config.input_y == 0)
    throw ConfigError("model architecture: both view input widths must be positive");
  if (config.z_dim == 0)
    throw ConfigError("model architecture: z_dim must be positive");
}

void validate_net(const MlpSpec& spec, const ParamSet& params, const std::string& name) {
  nn::validate(spec);
  const auto layout = nn::param_layout(spec);
  if (layout.size() != params.size())
    throw ConfigError("model: " + name + " holds " + std::to_string(params.size()) +
                      " tensors but its spec needs " + std::to_string(layout.size()));
  for (const auto& [pname, shape] : layout) {
    if (!params.contains(pname))
      throw ConfigError("model: " + name + " is missing parameter " + pname);
    if (params.at(pname).shape != shape)
      throw DimensionError("model: " + name + "." + pname + " has shape " +
                           nn::shape_string(params.at(pname).shape) + ", expected " +
                           nn::shape_string(shape));
  }
}

void append_net(std::vector<std::string>& names, const ParamSet& params,
                const std::string& net) {
  for (const auto& item : params.items()) names.push_back(net + "." + item.name);
}

// Shared encoder pass + per-draw reparameterization inputs for one channel.
struct Channel {
  Value mean;     // [n, dim]
  Value log_var;  // [n, dim]
};

Channel run_encoder(Graph& g, const MlpSpec& spec, const std::vector<Value>& params,
                    Value input, const std::vector<Tensor>* masks) {
  nn::MlpValues out = nn::apply_mlp(g, spec, params, input, masks);
  if (!out.has_second)
    throw ConfigError("model: encoder spec lacks a mean/log-variance head");
  return Channel{out.first, out.second};
}

}  // namespace

VccapModel make_vccap(const ArchConfig& config, Rng& rng) {
  check_arch(config);
  VccapModel model;
  model.z_dim = config.z_dim;
  model.hx_dim = config.hx_dim;
  model.hy_dim = config.hy_dim;
  model.sigma_x = config.sigma_x;
  model.sigma_y = config.sigma_y;
  if (!(config.sigma_x > 0.0) || !(config.sigma_y > 0.0))
    throw ConfigError("model architecture: observation sigmas must be positive");

  model.encoder_z_spec =
      encoder_spec(config.input_x, config.shared_hidden, config.z_dim,
                   config.dropout_rate, config.activation);
  model.encoder_z = nn::init_params(model.encoder_z_spec, rng);

  if (config.hx_dim > 0) {
    model.encoder_hx_spec =
        encoder_spec(config.input_x, config.private_hidden, config.hx_dim,
                     config.dropout_rate, config.activation);
    model.encoder_hx = nn::init_params(model.encoder_hx_spec, rng);
  }
  if (config.hy_dim > 0) {
    model.encoder_hy_spec =
        encoder_spec(config.input_y, config.private_hidden, config.hy_dim,
                     config.dropout_rate, config.activation);
    model.encoder_hy = nn::init_params(model.encoder_hy_spec, rng);
  }

  model.decoder_x_spec =
      decoder_spec(config.z_dim + config.hx_dim, config.decoder_hidden,
                   config.input_x, config.dropout_rate, config.activation);
  model.decoder_x = nn::init_params(model.decoder_x_spec, rng);
  model.decoder_y_spec =
      decoder_spec(config.z_dim + config.hy_dim, config.decoder_hidden,
                   config.input_y, config.dropout_rate, config.activation);
  model.decoder_y = nn::init_params(model.decoder_y_spec, rng);
  return model;
}

VccaModel make_vcca(const ArchConfig& config, Rng& rng) {
  ArchConfig shared_only = config;
  shared_only.hx_dim = 0;
  shared_only.hy_dim = 0;
  return make_vccap(shared_only, rng);  // slices to the base on return
}

void validate_model(const VccapModel& model) {
  validate_net(model.encoder_z_spec, model.encoder_z, "encoder_z");
  if (model.encoder_z_spec.output_heads != nn::OutputHead::mean_and_logvar)
    throw ConfigError("model: encoder_z must end in mean and log-variance heads");
  if (model.encoder_z_spec.output_width() != static_cast<int>(model.z_dim))
    throw DimensionError("model: encoder_z emits width " +
                         std::to_string(model.encoder_z_spec.output_width()) +
                         ", expected z_dim " + std::to_string(model.z_dim));

  if (model.hx_dim > 0) {
    validate_net(model.encoder_hx_spec, model.encoder_hx, "encoder_hx");
    if (model.encoder_hx_spec.output_width() != static_cast<int>(model.hx_dim))
      throw DimensionError("model: encoder_hx output width mismatch");
  } else if (!model.encoder_hx.empty()) {
    throw ConfigError("model: hx_dim is 0 but encoder_hx holds parameters");
  }
  if (model.hy_dim > 0) {
    validate_net(model.encoder_hy_spec, model.encoder_hy, "encoder_hy");
    if (model.encoder_hy_spec.output_width() != static_cast<int>(model.hy_dim))
      throw DimensionError("model: encoder_hy output width mismatch");
  } else if (!model.encoder_hy.empty()) {
    throw ConfigError("model: hy_dim is 0 but encoder_hy holds parameters");
  }

  validate_net(model.decoder_x_spec, model.decoder_x, "decoder_x");
  validate_net(model.decoder_y_spec, model.decoder_y, "decoder_y");
  if (model.decoder_x_spec.input_width() !=
      static_cast<int>(model.z_dim + model.hx_dim))
    throw DimensionError("model: decoder_x must consume z_dim + hx_dim inputs");
  if (model.decoder_y_spec.input_width() !=
      static_cast<int>(model.z_dim + model.hy_dim))
    throw DimensionError("model: decoder_y must consume z_dim + hy_dim inputs");
  if (model.decoder_x_spec.input_width() != model.encoder_z_spec.output_width() +
                                                (model.hx_dim > 0
                                                     ? model.encoder_hx_spec.output_width()
                                                     : 0))
    throw DimensionError("model: decoder_x input width inconsistent with encoders");
  if (!(model.sigma_x > 0.0) || !(model.sigma_y > 0.0))
    throw ConfigError("model: observation sigmas must be positive");
}

namespace {

template <typename ModelT, typename TensorT>
std::vector<TensorT*> collect_tensors(ModelT& model) {
  std::vector<TensorT*> out;
  auto take = [&out](auto& params) {
    for (auto& item : params.items()) out.push_back(&item.value);
  };
  take(model.encoder_z);
  take(model.encoder_hx);
  take(model.encoder_hy);
  take(model.decoder_x);
  take(model.decoder_y);
  return out;
}

}  // namespace

std::vector<Tensor*> param_tensors(VccapModel& model) {
  return collect_tensors<VccapModel, Tensor>(model);
}

std::vector<const Tensor*> param_tensors(const VccapModel& model) {
  return collect_tensors<const VccapModel, const Tensor>(model);
}

std::vector<std::string> param_names(const VccapModel& model) {
  std::vector<std::string> names;
  append_net(names, model.encoder_z, "encoder_z");
  append_net(names, model.encoder_hx, "encoder_hx");
  append_net(names, model.encoder_hy, "encoder_hy");
  append_net(names, model.decoder_x, "decoder_x");
  append_net(names, model.decoder_y, "decoder_y");
  return names;
}

std::vector<Value> BoundParams::flat() const {
  std::vector<Value> all;
  all.reserve(encoder_z.size() + encoder_hx.size() + encoder_hy.size() +
              decoder_x.size() + decoder_y.size());
  auto take = [&all](const std::vector<Value>& part) {
    all.insert(all.end(), part.begin(), part.end());
  };
  take(encoder_z);
  take(encoder_hx);
  take(encoder_hy);
  take(decoder_x);
  take(decoder_y);
  return all;
}

BoundParams bind_vccap(Graph& g, const VccapModel& model, bool frozen) {
  BoundParams bound;
  bound.encoder_z = nn::bind_params(g, model.encoder_z, frozen);
  bound.encoder_hx = nn::bind_params(g, model.encoder_hx, frozen);
  bound.encoder_hy = nn::bind_params(g, model.encoder_hy, frozen);
  bound.decoder_x = nn::bind_params(g, model.decoder_x, frozen);
  bound.decoder_y = nn::bind_params(g, model.decoder_y, frozen);
  return bound;
}

BoundParams split_params(const VccapModel& model, const std::vector<Value>& flat) {
  const std::size_t expected = model.encoder_z.size() + model.encoder_hx.size() +
                               model.encoder_hy.size() + model.decoder_x.size() +
                               model.decoder_y.size();
  if (flat.size() != expected)
    throw DimensionError("split_params: got " + std::to_string(flat.size()) +
                         " leaves, model has " + std::to_string(expected));
  BoundParams bound;
  auto it = flat.begin();
  auto take = [&it](std::vector<Value>& part, std::size_t n) {
    part.assign(it, it + static_cast<std::ptrdiff_t>(n));
    it += static_cast<std::ptrdiff_t>(n);
  };
  take(bound.encoder_z, model.encoder_z.size());
  take(bound.encoder_hx, model.encoder_hx.size());
  take(bound.encoder_hy, model.encoder_hy.size());
  take(bound.decoder_x, model.decoder_x.size());
  take(bound.decoder_y, model.decoder_y.size());
  return bound;
}

ElboDraws make_draws(const VccapModel& model, std::size_t n, std::size_t mc_samples,
                     Rng& rng) {
  if (mc_samples == 0)
    throw InvalidArgument("make_draws: mc_samples must be at least 1");
  ElboDraws draws;
  auto fill = [&rng, n](std::vector<Tensor>& into, std::size_t dim) {
    Tensor eps = Tensor::zeros({n, dim});
    rng.fill_normal(eps.data.data(), eps.data.size());
    into.push_back(std::move(eps));
  };
  for (std::size_t s = 0; s < mc_samples; ++s) {
    fill(draws.eps_z, model.z_dim);
    if (model.hx_dim > 0) fill(draws.eps_hx, model.hx_dim);
    if (model.hy_dim > 0) fill(draws.eps_hy, model.hy_dim);
  }
  return draws;
}

VccapMasks make_masks(const VccapModel& model, std::size_t n, Rng& rng) {
  VccapMasks masks;
  auto fill = [&rng, n](std::vector<Tensor>& into, const MlpSpec& spec,
                        bool active) {
    if (!active) return;
    for (int layer = 1; layer + 1 < static_cast<int>(spec.layer_widths.size());
         ++layer) {
      into.push_back(nn::make_dropout_mask(
          spec.dropout_rate,
          {n, static_cast<std::size_t>(spec.layer_widths[layer])}, rng));
    }
  };
  fill(masks.encoder_z, model.encoder_z_spec, true);
  fill(masks.encoder_hx, model.encoder_hx_spec, model.hx_dim > 0);
  fill(masks.encoder_hy, model.encoder_hy_spec, model.hy_dim > 0);
  fill(masks.decoder_x, model.decoder_x_spec, true);
  fill(masks.decoder_y, model.decoder_y_spec, true);
  return masks;
}

ElboNodes build_elbo(Graph& g, const VccapModel& model, const BoundParams& params,
                     const Tensor& x, const Tensor& y, const ElboDraws& draws,
                     const ElboWeights& weights, const PriorBatch& prior,
                     const VccapMasks* masks) {
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows())
    throw DimensionError("build_elbo: x and y must be [n, d] with equal n");
  if (x.cols() != static_cast<std::size_t>(model.encoder_z_spec.input_width()))
    throw DimensionError("build_elbo: x width " + std::to_string(x.cols()) +
                         " does not match the encoder input width " +
                         std::to_string(model.encoder_z_spec.input_width()));
  if (y.cols() != static_cast<std::size_t>(model.decoder_y_spec.output_width()))
    throw DimensionError("build_elbo: y width " + std::to_string(y.cols()) +
                         " does not match the y decoder output width " +
                         std::to_string(model.decoder_y_spec.output_width()));
  const std::size_t mc_samples = draws.eps_z.size();
  if (mc_samples == 0) throw InvalidArgument("build_elbo: no Monte Carlo draws");
  if (model.hx_dim > 0 && draws.eps_hx.size() != mc_samples)
    throw DimensionError("build_elbo: eps_hx draw count mismatch");
  if (model.hy_dim > 0 && draws.eps_hy.size() != mc_samples)
    throw DimensionError("build_elbo: eps_hy draw count mismatch");
  if (!prior.standard() &&
      (prior.mean.shape != std::vector<std::size_t>{x.rows(), model.z_dim} ||
       prior.log_var.shape != prior.mean.shape))
    throw DimensionError("build_elbo: prior batch must be [n, z_dim]");

  Value x_in = g.constant(x, "x");
  Value y_in = g.constant(y, "y");

  const std::vector<Tensor>* mz = masks ? &masks->encoder_z : nullptr;
  const std::vector<Tensor>* mhx = masks ? &masks->encoder_hx : nullptr;
  const std::vector<Tensor>* mhy = masks ? &masks->encoder_hy : nullptr;
  const std::vector<Tensor>* mdx = masks ? &masks->decoder_x : nullptr;
  const std::vector<Tensor>* mdy = masks ? &masks->decoder_y : nullptr;

  // Encoders run once; only the reparameterized draws differ per MC sample.
  Channel qz = run_encoder(g, model.encoder_z_spec, params.encoder_z, x_in, mz);
  Channel qhx, qhy;
  if (model.hx_dim > 0)
    qhx = run_encoder(g, model.encoder_hx_spec, params.encoder_hx, x_in, mhx);
  if (model.hy_dim > 0)
    qhy = run_encoder(g, model.encoder_hy_spec, params.encoder_hy, y_in, mhy);

  Value kl_z_rows = prior.standard()
                        ? nn::kl_to_standard_rows(qz.mean, qz.log_var)
                        : nn::kl_to_const_rows(qz.mean, qz.log_var, prior.mean,
                                               prior.log_var);
  Value kl_hx_rows, kl_hy_rows;
  if (model.hx_dim > 0) kl_hx_rows = nn::kl_to_standard_rows(qhx.mean, qhx.log_var);
  if (model.hy_dim > 0) kl_hy_rows = nn::kl_to_standard_rows(qhy.mean, qhy.log_var);

  Value rec_x_rows, rec_y_rows;
  ElboNodes nodes;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    Value z = nn::reparameterize_rows(qz.mean, qz.log_var, draws.eps_z[s]);

    Value dec_x_in = z;
    if (model.hx_dim > 0) {
      Value hx = nn::reparameterize_rows(qhx.mean, qhx.log_var, draws.eps_hx[s]);
      dec_x_in = concat_cols(z, hx);
    }
    nn::MlpValues dec_x =
        nn::apply_mlp(g, model.decoder_x_spec, params.decoder_x, dec_x_in, mdx);
    Value rx = nn::gaussian_loglik_rows(x, dec_x.first, model.sigma_x);

    Value dec_y_in = z;
    if (model.hy_dim > 0) {
      Value hy = nn::reparameterize_rows(qhy.mean, qhy.log_var, draws.eps_hy[s]);
      dec_y_in = concat_cols(z, hy);
    }
    nn::MlpValues dec_y =
        nn::apply_mlp(g, model.decoder_y_spec, params.decoder_y, dec_y_in, mdy);
    Value ry = nn::gaussian_loglik_rows(y, dec_y.first, model.sigma_y);

    if (s == 0) {
      nodes.recon_x = dec_x.first;
      nodes.recon_y = dec_y.first;
      rec_x_rows = rx;
      rec_y_rows = ry;
    } else {
      rec_x_rows = rec_x_rows + rx;
      rec_y_rows = rec_y_rows + ry;
    }
  }
  if (mc_samples > 1) {
    const double inv = 1.0 / static_cast<double>(mc_samples);
    rec_x_rows = scale(rec_x_rows, inv);
    rec_y_rows = scale(rec_y_rows, inv);
  }

  Value bound_rows = rec_x_rows + rec_y_rows - scale(kl_z_rows, weights.beta_z);
  if (model.hx_dim > 0) bound_rows = bound_rows - scale(kl_hx_rows, weights.beta_hx);
  if (model.hy_dim > 0) bound_rows = bound_rows - scale(kl_hy_rows, weights.beta_hy);

  nodes.elbo = mean_all(bound_rows);
  nodes.kl_z = mean_all(kl_z_rows);
  if (model.hx_dim > 0) nodes.kl_hx = mean_all(kl_hx_rows);
  if (model.hy_dim > 0) nodes.kl_hy = mean_all(kl_hy_rows);
  nodes.rec_x = mean_all(rec_x_rows);
  nodes.rec_y = mean_all(rec_y_rows);
  return nodes;
}

ElboBreakdown elbo_vccap(const VccapModel& model, const Tensor& x, const Tensor& y,
                         const ElboDraws& draws, const ElboWeights& weights,
                         const PriorBatch& prior) {
  Graph g;
  BoundParams params = bind_vccap(g, model, /*frozen=*/true);
  ElboNodes nodes = build_elbo(g, model, params, x, y, draws, weights, prior);
  ElboBreakdown out;
  out.elbo = g.scalar(nodes.elbo);
  out.kl_z = g.scalar(nodes.kl_z);
  out.kl_hx = nodes.kl_hx.valid() ? g.scalar(nodes.kl_hx) : 0.0;
  out.kl_hy = nodes.kl_hy.valid() ? g.scalar(nodes.kl_hy) : 0.0;
  out.rec_x = g.scalar(nodes.rec_x);
  out.rec_y = g.scalar(nodes.rec_y);
  return out;
}

ElboBreakdown elbo_vcca(const VccaModel& model, const Tensor& x, const Tensor& y,
                        const std::vector<Tensor>& eps_z, double beta,
                        const PriorBatch& prior) {
  VccapModel shared_only;
  static_cast<VccaModel&>(shared_only) = model;
  ElboDraws draws;
  draws.eps_z = eps_z;
  ElboWeights weights;
  weights.beta_z = beta;
  return elbo_vccap(shared_only, x, y, draws, weights, prior);
}

Tensor encode_features(const VccaModel& model, const Tensor& x) {
  return nn::forward_mlp(model.encoder_z_spec, model.encoder_z, x).first;
}

namespace {

// mean + exp(0.5 log_var) * eps, elementwise over [n, d] tensors.
Tensor reparameterize_numeric(const Tensor& mean, const Tensor& log_var,
                              const Tensor& eps) {
  Tensor out = mean;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] += std::exp(0.5 * log_var.data[i]) * eps.data[i];
  }
  return out;
}

}  // namespace

Reconstructions reconstruct_views(const VccapModel& model, const Tensor& x,
                                  const Tensor& y, const ElboDraws& draws) {
  validate_model(model);
  if (draws.eps_z.empty())
    throw InvalidArgument("reconstruct_views: no Monte Carlo draws");
  nn::MlpOutput qz = nn::forward_mlp(model.encoder_z_spec, model.encoder_z, x);
  Tensor z = reparameterize_numeric(qz.first, qz.second, draws.eps_z.front());

  Tensor dec_x_in = z;
  if (model.hx_dim > 0) {
    nn::MlpOutput qhx =
        nn::forward_mlp(model.encoder_hx_spec, model.encoder_hx, x);
    Tensor hx =
        reparameterize_numeric(qhx.first, qhx.second, draws.eps_hx.front());
    dec_x_in = nn::t_concat_cols(z, hx);
  }
  Tensor dec_y_in = z;
  if (model.hy_dim > 0) {
    nn::MlpOutput qhy =
        nn::forward_mlp(model.encoder_hy_spec, model.encoder_hy, y);
    Tensor hy =
        reparameterize_numeric(qhy.first, qhy.second, draws.eps_hy.front());
    dec_y_in = nn::t_concat_cols(z, hy);
  }
  Reconstructions recon;
  recon.x = nn::forward_mlp(model.decoder_x_spec, model.decoder_x, dec_x_in).first;
  recon.y = nn::forward_mlp(model.decoder_y_spec, model.decoder_y, dec_y_in).first;
  return recon;
}

}  // namespace mvlatent::model
