#include "mvlatent/contrastive.hpp"

#include <string>
#include <utility>

#include "mvlatent/errors.hpp"
#include "mvlatent/tensor_ops.hpp"

namespace mvlatent::model {

namespace {

MlpSpec projection_spec(std::size_t input, const std::vector<int>& hidden,
                        std::size_t output, double dropout_rate) {
  MlpSpec spec;
  spec.layer_widths.push_back(static_cast<int>(input));
  for (int h : hidden) spec.layer_widths.push_back(h);
  spec.layer_widths.push_back(static_cast<int>(output));
  spec.activation = nn::Activation::relu;
  spec.dropout_rate = dropout_rate;
  spec.output_heads = nn::OutputHead::single;
  return spec;
}

/// Row-wise Euclidean distance between two [n, k] nodes -> [n, 1].
Value distance_rows(Graph& g, Value a, Value b) {
  (void)g;
  Value diff = nn::ops::sub(a, b);
  return nn::ops::sqrt_guarded(nn::ops::row_sum(nn::ops::square(diff)));
}

}  // namespace

ContrastiveModel make_contrastive(const ContrastiveArch& arch, Rng& rng) {
  if (arch.input_x == 0 || arch.input_y == 0) {
    throw ConfigError("contrastive model requires nonzero input widths");
  }
  if (arch.feature_dim == 0) {
    throw ConfigError("contrastive feature_dim must be positive");
  }
  if (arch.margin <= 0.0) {
    throw ConfigError("contrastive margin must be positive");
  }
  ContrastiveModel model;
  model.margin = arch.margin;
  model.feature_dim = arch.feature_dim;
  model.proj_x_spec = projection_spec(arch.input_x, arch.hidden,
                                      arch.feature_dim, arch.dropout_rate);
  model.proj_y_spec = projection_spec(arch.input_y, arch.hidden,
                                      arch.feature_dim, arch.dropout_rate);
  model.proj_x = nn::init_params(model.proj_x_spec, rng);
  model.proj_y = nn::init_params(model.proj_y_spec, rng);
  validate_model(model);
  return model;
}

void validate_model(const ContrastiveModel& model) {
  nn::validate(model.proj_x_spec);
  nn::validate(model.proj_y_spec);
  if (model.proj_x_spec.output_heads != nn::OutputHead::single ||
      model.proj_y_spec.output_heads != nn::OutputHead::single) {
    throw ConfigError("contrastive projections must have a single output head");
  }
  if (model.proj_x_spec.output_width() !=
          static_cast<int>(model.feature_dim) ||
      model.proj_y_spec.output_width() !=
          static_cast<int>(model.feature_dim)) {
    throw ConfigError("projection output width must equal feature_dim");
  }
  if (model.margin <= 0.0) {
    throw ConfigError("contrastive margin must be positive");
  }
  auto check_net = [](const MlpSpec& spec, const ParamSet& params,
                      const char* which) {
    auto layout = nn::param_layout(spec);
    if (layout.size() != params.size()) {
      throw ConfigError(std::string(which) +
                        ": parameter count does not match spec");
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (params.items()[i].name != layout[i].first ||
          params.items()[i].value.shape != layout[i].second) {
        throw ConfigError(std::string(which) + ": parameter " +
                          layout[i].first + " has unexpected name or shape");
      }
    }
  };
  check_net(model.proj_x_spec, model.proj_x, "proj_x");
  check_net(model.proj_y_spec, model.proj_y, "proj_y");
}

std::vector<Tensor*> param_tensors(ContrastiveModel& model) {
  std::vector<Tensor*> out;
  for (auto& item : model.proj_x.items()) out.push_back(&item.value);
  for (auto& item : model.proj_y.items()) out.push_back(&item.value);
  return out;
}

std::vector<const Tensor*> param_tensors(const ContrastiveModel& model) {
  std::vector<const Tensor*> out;
  for (const auto& item : model.proj_x.items()) out.push_back(&item.value);
  for (const auto& item : model.proj_y.items()) out.push_back(&item.value);
  return out;
}

std::vector<std::string> param_names(const ContrastiveModel& model) {
  std::vector<std::string> out;
  for (const auto& item : model.proj_x.items())
    out.push_back("proj_x." + item.name);
  for (const auto& item : model.proj_y.items())
    out.push_back("proj_y." + item.name);
  return out;
}

std::vector<std::size_t> pick_negatives(std::size_t n, Rng& rng) {
  if (n < 2) {
    throw InvalidArgument("negative sampling needs at least two pairs");
  }
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = rng.index(n - 1);
    out[i] = j >= i ? j + 1 : j;
  }
  return out;
}

Value build_hinge_rows(Graph& g, Value fx, Value fy_pos, Value fy_neg,
                       double margin) {
  if (margin <= 0.0) {
    throw ConfigError("contrastive margin must be positive");
  }
  Value d_pos = distance_rows(g, fx, fy_pos);
  Value d_neg = distance_rows(g, fx, fy_neg);
  Value slack = nn::ops::add_scalar(nn::ops::sub(d_pos, d_neg), margin);
  return nn::ops::mean_all(nn::ops::relu(slack));
}

Value build_contrastive_loss(Graph& g, const ContrastiveModel& model,
                             const std::vector<Value>& proj_x_params,
                             const std::vector<Value>& proj_y_params,
                             const Tensor& x, const Tensor& y,
                             const std::vector<std::size_t>& negatives,
                             const std::vector<Tensor>* masks_x,
                             const std::vector<Tensor>* masks_y) {
  validate_model(model);
  if (x.rank() != 2 || y.rank() != 2) {
    throw DimensionError("contrastive loss expects rank-2 view batches");
  }
  if (x.shape[0] != y.shape[0]) {
    throw DimensionError("view batches must have the same number of rows");
  }
  const std::size_t n = x.shape[0];
  if (n < 2) {
    throw InvalidArgument("contrastive loss needs at least two pairs");
  }
  if (x.shape[1] != static_cast<std::size_t>(model.proj_x_spec.input_width()) ||
      y.shape[1] != static_cast<std::size_t>(model.proj_y_spec.input_width())) {
    throw DimensionError("view width does not match projection input width");
  }
  if (negatives.size() != n) {
    throw InvalidArgument("need exactly one negative index per pair");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (negatives[i] >= n) {
      throw InvalidArgument("negative index out of range");
    }
    if (negatives[i] == i) {
      throw InvalidArgument("a pair cannot serve as its own negative");
    }
  }
  Value xv = g.constant(x, "x");
  Value yv = g.constant(y, "y");
  Value fx = nn::apply_mlp(g, model.proj_x_spec, proj_x_params, xv, masks_x).first;
  Value fy = nn::apply_mlp(g, model.proj_y_spec, proj_y_params, yv, masks_y).first;
  Value fy_neg = nn::ops::gather_rows(fy, negatives);
  return build_hinge_rows(g, fx, fy, fy_neg, model.margin);
}

double contrastive_loss(const Tensor& fx, const Tensor& fy_pos,
                        const Tensor& fy_neg, double margin) {
  Graph g;
  Value loss = build_hinge_rows(g, g.constant(fx, "fx"),
                                g.constant(fy_pos, "fy_pos"),
                                g.constant(fy_neg, "fy_neg"), margin);
  return g.scalar(loss);
}

Tensor contrastive_features(const ContrastiveModel& model, const Tensor& x) {
  validate_model(model);
  if (x.rank() != 2 ||
      x.shape[1] != static_cast<std::size_t>(model.proj_x_spec.input_width())) {
    throw DimensionError("feature extraction expects [n, input_width] input");
  }
  return nn::forward_mlp(model.proj_x_spec, model.proj_x, x).first;
}

}  // namespace mvlatent::model
