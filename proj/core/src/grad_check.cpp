#include "mvlatent/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "mvlatent/errors.hpp"
#include "mvlatent/rng.hpp"

namespace mvlatent::nn {

namespace {

double evaluate(const LossBuilder& build, const std::vector<Tensor>& params) {
  Graph g;
  std::vector<Value> leaves;
  leaves.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    leaves.push_back(g.param(params[i], "p" + std::to_string(i)));
  }
  Value loss = build(g, leaves);
  double value = g.scalar(loss);
  if (!std::isfinite(value)) throw NumericError("grad_check: non-finite loss value");
  return value;
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> coords(n);
  for (std::size_t i = 0; i < n; ++i) coords[i] = i;
  if (cap == 0 || cap >= n) return coords;
  rng.shuffle(coords);
  coords.resize(cap);
  std::sort(coords.begin(), coords.end());
  return coords;
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& build, const std::vector<Tensor>& params,
                           const GradCheckConfig& config) {
  if (config.perturbation <= 0.0) {
    throw InvalidArgument("grad_check: perturbation must be > 0");
  }

  // Analytic pass: one graph, one backward sweep.
  Graph g;
  std::vector<Value> leaves;
  leaves.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    leaves.push_back(g.param(params[i], "p" + std::to_string(i)));
  }
  Value loss = build(g, leaves);
  if (!std::isfinite(g.scalar(loss))) {
    throw NumericError("grad_check: non-finite loss value");
  }
  g.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Value v : leaves) analytic.push_back(g.grad(v));

  Rng rng(config.seed);
  GradCheckResult result;
  std::vector<Tensor> perturbed = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto coords = pick_coords(params[p].numel(), config.max_coords_per_param, rng);
    for (std::size_t k : coords) {
      const double saved = perturbed[p][k];
      perturbed[p][k] = saved + config.perturbation;
      const double plus = evaluate(build, perturbed);
      perturbed[p][k] = saved - config.perturbation;
      const double minus = evaluate(build, perturbed);
      perturbed[p][k] = saved;

      const double numeric = (plus - minus) / (2.0 * config.perturbation);
      const double a = analytic[p][k];
      const double rel = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.checked_coords;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_coord = "p" + std::to_string(p) + "[" + std::to_string(k) + "]";
      }
    }
  }
  return result;
}

}  // namespace mvlatent::nn
