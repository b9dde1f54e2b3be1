#include "mvlatent/gaussian_graph.hpp"

#include <cmath>

#include "mvlatent/errors.hpp"

namespace mvlatent::nn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Graph& graph_of(Value mean, Value log_var, const char* op) {
  if (!mean.valid() || !log_var.valid() || mean.graph != log_var.graph) {
    throw InvalidArgument(std::string(op) + ": operands from different graphs");
  }
  const Tensor& m = mean.graph->value(mean);
  const Tensor& lv = mean.graph->value(log_var);
  if (m.rank() != 2 || !m.same_shape(lv)) {
    throw DimensionError(std::string(op) + ": mean " + shape_string(m.shape) +
                         " and log_var " + shape_string(lv.shape) +
                         " must be matching [N, d] tensors");
  }
  return *mean.graph;
}

}  // namespace

Value kl_to_standard_rows(Value mean, Value log_var) {
  graph_of(mean, log_var, "kl_to_standard_rows");
  // 0.5 * sum_j( exp(lv) + mean^2 - lv - 1 )
  Value inner = ops::sub(ops::exp_elem(log_var), log_var) +
                ops::add_scalar(ops::square(mean), -1.0);
  return ops::scale(ops::row_sum(inner), 0.5);
}

Value kl_to_const_rows(Value mean, Value log_var, const Tensor& prior_mean,
                       const Tensor& prior_log_var) {
  Graph& g = graph_of(mean, log_var, "kl_to_const_rows");
  const Tensor& m = g.value(mean);
  if (!prior_mean.same_shape(m) || !prior_log_var.same_shape(m)) {
    throw DimensionError("kl_to_const_rows: prior shape mismatch, expected " +
                         shape_string(m.shape));
  }
  Value pm = g.constant(prior_mean, "prior_mean");
  Value plv = g.constant(prior_log_var, "prior_log_var");
  // exp(-prior_log_var), precomputed from data.
  Tensor inv_pv = prior_log_var;
  for (auto& v : inv_pv.data) v = std::exp(-v);
  Value ipv = g.constant(inv_pv, "prior_inv_var");

  // 0.5 * sum_j( (plv - lv) + exp(lv - plv) + (mean - pm)^2/pv - 1 )
  Value dm = ops::sub(mean, pm);
  Value inner = ops::sub(plv, log_var) + ops::exp_elem(ops::sub(log_var, plv)) +
                ops::add_scalar(ops::mul(ops::square(dm), ipv), -1.0);
  return ops::scale(ops::row_sum(inner), 0.5);
}

Value gaussian_loglik_rows(const Tensor& x, Value mean, double sigma) {
  if (!mean.valid()) throw InvalidArgument("gaussian_loglik_rows: invalid mean");
  if (sigma <= 0.0) {
    throw InvalidArgument("gaussian_loglik_rows: sigma must be > 0, got " +
                          std::to_string(sigma));
  }
  Graph& g = *mean.graph;
  const Tensor& m = g.value(mean);
  if (m.rank() != 2 || !x.same_shape(m)) {
    throw DimensionError("gaussian_loglik_rows: x " + shape_string(x.shape) +
                         " must match mean " + shape_string(m.shape));
  }
  const double d = static_cast<double>(m.shape[1]);
  const double log_norm = -0.5 * d * (kLog2Pi + 2.0 * std::log(sigma));
  Value diff = ops::sub(g.constant(x, "x"), mean);
  Value sq = ops::row_sum(ops::square(diff));
  return ops::add_scalar(ops::scale(sq, -0.5 / (sigma * sigma)), log_norm);
}

Value reparameterize_rows(Value mean, Value log_var, const Tensor& eps) {
  Graph& g = graph_of(mean, log_var, "reparameterize_rows");
  if (!eps.same_shape(g.value(mean))) {
    throw DimensionError("reparameterize_rows: eps shape mismatch, expected " +
                         shape_string(g.value(mean).shape));
  }
  Value e = g.constant(eps, "eps");
  Value std_dev = ops::exp_elem(ops::scale(log_var, 0.5));
  return ops::add(mean, ops::mul(std_dev, e));
}

}  // namespace mvlatent::nn
