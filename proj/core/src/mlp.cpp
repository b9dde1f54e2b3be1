#include "mvlatent/mlp.hpp"

#include <cmath>
#include <cstddef>

#include "mvlatent/errors.hpp"
#include "mvlatent/tensor_ops.hpp"

namespace mvlatent::nn {

void validate(const MlpSpec& spec) {
  if (spec.layer_widths.size() < 2) {
    throw ConfigError("mlp spec needs at least input and output widths, got " +
                      std::to_string(spec.layer_widths.size()));
  }
  for (std::size_t i = 0; i < spec.layer_widths.size(); ++i) {
    if (spec.layer_widths[i] < 1) {
      throw ConfigError("mlp layer width " + std::to_string(i) +
                        " must be >= 1, got " + std::to_string(spec.layer_widths[i]));
    }
  }
  if (spec.dropout_rate < 0.0 || spec.dropout_rate >= 1.0) {
    throw ConfigError("dropout_rate must be in [0, 1), got " +
                      std::to_string(spec.dropout_rate));
  }
}

void ParamSet::add(std::string name, Tensor value) {
  if (index_.count(name) != 0) {
    throw InvalidArgument("duplicate parameter name: " + name);
  }
  index_.emplace(name, items_.size());
  items_.push_back(Named{std::move(name), std::move(value)});
}

bool ParamSet::contains(const std::string& name) const { return index_.count(name) != 0; }

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("no parameter named " + name);
  return items_[it->second].value;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("no parameter named " + name);
  return items_[it->second].value;
}

std::size_t ParamSet::total_elems() const {
  std::size_t n = 0;
  for (const auto& item : items_) n += item.value.numel();
  return n;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> param_layout(
    const MlpSpec& spec) {
  validate(spec);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout;
  const auto& w = spec.layer_widths;
  const std::size_t affine_count = w.size() - 1;
  for (std::size_t l = 0; l + 1 < affine_count; ++l) {
    auto in = static_cast<std::size_t>(w[l]);
    auto out = static_cast<std::size_t>(w[l + 1]);
    layout.emplace_back("w" + std::to_string(l), std::vector<std::size_t>{out, in});
    layout.emplace_back("b" + std::to_string(l), std::vector<std::size_t>{out});
  }
  const std::size_t last = affine_count - 1;
  auto in = static_cast<std::size_t>(w[last]);
  auto out = static_cast<std::size_t>(w[last + 1]);
  if (spec.output_heads == OutputHead::single) {
    layout.emplace_back("w" + std::to_string(last), std::vector<std::size_t>{out, in});
    layout.emplace_back("b" + std::to_string(last), std::vector<std::size_t>{out});
  } else {
    layout.emplace_back("w_mean", std::vector<std::size_t>{out, in});
    layout.emplace_back("b_mean", std::vector<std::size_t>{out});
    layout.emplace_back("w_logvar", std::vector<std::size_t>{out, in});
    layout.emplace_back("b_logvar", std::vector<std::size_t>{out});
  }
  return layout;
}

namespace {

Tensor init_weight(std::size_t out, std::size_t in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w = Tensor::zeros({out, in});
  for (auto& v : w.data) v = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

ParamSet init_params(const MlpSpec& spec, Rng& rng) {
  ParamSet params;
  for (const auto& [name, shape] : param_layout(spec)) {
    if (name[0] == 'w') {
      params.add(name, init_weight(shape[0], shape[1], rng));
    } else {
      params.add(name, Tensor::zeros(shape));
    }
  }
  return params;
}

Mlp make_mlp(MlpSpec spec, Rng& rng) {
  ParamSet params = init_params(spec, rng);
  return Mlp{std::move(spec), std::move(params)};
}

Tensor make_dropout_mask(double rate, const std::vector<std::size_t>& shape, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw InvalidArgument("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  Tensor mask = Tensor::zeros(shape);
  if (rate == 0.0) {
    for (auto& v : mask.data) v = 1.0;
    return mask;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& v : mask.data) v = (rng.uniform() < rate) ? 0.0 : keep_scale;
  return mask;
}

namespace {

void check_input(const MlpSpec& spec, const Tensor& input) {
  if (input.rank() != 2 ||
      input.cols() != static_cast<std::size_t>(spec.input_width())) {
    throw DimensionError("mlp input must be [n, " +
                         std::to_string(spec.input_width()) + "], got " +
                         shape_string(input.shape));
  }
}

void check_masks(const MlpSpec& spec, const Tensor& input,
                 const std::vector<Tensor>* masks) {
  if (masks == nullptr) return;
  const auto hidden = static_cast<std::size_t>(spec.hidden_count());
  if (masks->size() != hidden) {
    throw DimensionError("expected " + std::to_string(hidden) +
                         " dropout masks, got " + std::to_string(masks->size()));
  }
  for (std::size_t l = 0; l < hidden; ++l) {
    const Tensor& m = (*masks)[l];
    if (m.rank() != 2 || m.rows() != input.rows() ||
        m.cols() != static_cast<std::size_t>(spec.layer_widths[l + 1])) {
      throw DimensionError("dropout mask " + std::to_string(l) + " must be [" +
                           std::to_string(input.rows()) + ", " +
                           std::to_string(spec.layer_widths[l + 1]) + "], got " +
                           shape_string(m.shape));
    }
  }
}

Tensor affine_numeric(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor out = t_matmul_nt(x, w);
  return t_add_rowvec(out, b);
}

Tensor activate_numeric(const Tensor& x, Activation act) {
  return act == Activation::relu ? t_relu(x) : x;
}

}  // namespace

MlpOutput forward_mlp(const MlpSpec& spec, const ParamSet& params, const Tensor& input,
                      const std::vector<Tensor>* dropout_masks, bool checked) {
  validate(spec);
  check_input(spec, input);
  check_masks(spec, input, dropout_masks);

  Tensor h = input;
  const int hidden = spec.hidden_count();
  for (int l = 0; l < hidden; ++l) {
    h = affine_numeric(h, params.at("w" + std::to_string(l)),
                       params.at("b" + std::to_string(l)));
    h = activate_numeric(h, spec.activation);
    if (dropout_masks != nullptr) h = t_mul(h, (*dropout_masks)[static_cast<std::size_t>(l)]);
    if (checked) h.require_finite("mlp hidden layer " + std::to_string(l));
  }

  MlpOutput out;
  if (spec.output_heads == OutputHead::single) {
    const std::string l = std::to_string(hidden);
    out.first = affine_numeric(h, params.at("w" + l), params.at("b" + l));
    if (checked) out.first.require_finite("mlp output");
  } else {
    out.first = affine_numeric(h, params.at("w_mean"), params.at("b_mean"));
    out.second = affine_numeric(h, params.at("w_logvar"), params.at("b_logvar"));
    out.has_second = true;
    if (checked) {
      out.first.require_finite("mlp mean head");
      out.second.require_finite("mlp log-variance head");
    }
  }
  return out;
}

MlpValues apply_mlp(Graph& g, const MlpSpec& spec, const std::vector<Value>& params,
                    Value input, const std::vector<Tensor>* dropout_masks) {
  validate(spec);
  if (!input.valid()) throw InvalidArgument("apply_mlp: invalid input value");
  check_input(spec, g.value(input));
  check_masks(spec, g.value(input), dropout_masks);

  const auto layout = param_layout(spec);
  if (params.size() != layout.size()) {
    throw DimensionError("expected " + std::to_string(layout.size()) +
                         " parameter values, got " + std::to_string(params.size()));
  }
  std::unordered_map<std::string, Value> by_name;
  for (std::size_t i = 0; i < layout.size(); ++i) by_name.emplace(layout[i].first, params[i]);

  Value h = input;
  const int hidden = spec.hidden_count();
  for (int l = 0; l < hidden; ++l) {
    const std::string idx = std::to_string(l);
    h = ops::affine(h, by_name.at("w" + idx), by_name.at("b" + idx));
    if (spec.activation == Activation::relu) h = ops::relu(h);
    if (dropout_masks != nullptr) {
      Value mask = g.constant((*dropout_masks)[static_cast<std::size_t>(l)],
                              "dropout_mask" + idx);
      h = ops::mul(h, mask);
    }
  }

  MlpValues out;
  if (spec.output_heads == OutputHead::single) {
    const std::string idx = std::to_string(hidden);
    out.first = ops::affine(h, by_name.at("w" + idx), by_name.at("b" + idx));
  } else {
    out.first = ops::affine(h, by_name.at("w_mean"), by_name.at("b_mean"));
    out.second = ops::affine(h, by_name.at("w_logvar"), by_name.at("b_logvar"));
    out.has_second = true;
  }
  return out;
}

std::vector<Value> bind_params(Graph& g, const ParamSet& params, bool frozen) {
  std::vector<Value> values;
  values.reserve(params.size());
  for (const auto& item : params.items()) {
    values.push_back(frozen ? g.constant(item.value, item.name)
                            : g.param(item.value, item.name));
  }
  return values;
}

}  // namespace mvlatent::nn
