#pragma once

#include <cstdint>
#include <vector>

#include "mvlatent/mlp.hpp"

namespace mvlatent::model {

using nn::Graph;
using nn::MlpSpec;
using nn::ParamSet;
using nn::Rng;
using nn::Tensor;
using nn::Value;

/// Margin-based two-view baseline: deterministic projections of both views,
/// trained so paired samples sit closer than unpaired ones by a margin.
struct ContrastiveModel {
  MlpSpec proj_x_spec;
  ParamSet proj_x;
  MlpSpec proj_y_spec;
  ParamSet proj_y;
  double margin = 1.0;
  std::size_t feature_dim = 50;
};

struct ContrastiveArch {
  std::size_t input_x = 0;
  std::size_t input_y = 0;
  std::size_t feature_dim = 50;
  std::vector<int> hidden = {1500, 1500, 1500};
  double margin = 1.0;
  double dropout_rate = 0.2;
};

ContrastiveModel make_contrastive(const ContrastiveArch& arch, Rng& rng);

void validate_model(const ContrastiveModel& model);

/// Canonical parameter enumeration: proj_x then proj_y, ParamSet order each.
std::vector<Tensor*> param_tensors(ContrastiveModel& model);
std::vector<const Tensor*> param_tensors(const ContrastiveModel& model);
std::vector<std::string> param_names(const ContrastiveModel& model);

/// One negative per pair: index j != i drawn uniformly from the minibatch.
/// Requires n >= 2.
std::vector<std::size_t> pick_negatives(std::size_t n, Rng& rng);

/// Mean over rows of max(0, margin + d(fx_i, fy_i) - d(fx_i, fy_neg_i)) with
/// d the Euclidean distance; the three feature batches are [n, k] nodes.
Value build_hinge_rows(Graph& g, Value fx, Value fy_pos, Value fy_neg,
                       double margin);

/// Full loss on live projection parameters: project both views, gather the
/// negatives from the same projected batch, apply the hinge.
Value build_contrastive_loss(Graph& g, const ContrastiveModel& model,
                             const std::vector<Value>& proj_x_params,
                             const std::vector<Value>& proj_y_params,
                             const Tensor& x, const Tensor& y,
                             const std::vector<std::size_t>& negatives,
                             const std::vector<Tensor>* masks_x = nullptr,
                             const std::vector<Tensor>* masks_y = nullptr);

/// Numeric hinge on already-projected features (evaluation / oracle path).
double contrastive_loss(const Tensor& fx, const Tensor& fy_pos, const Tensor& fy_neg,
                        double margin);

/// Learned features of the x view: the deterministic projection output.
Tensor contrastive_features(const ContrastiveModel& model, const Tensor& x);

}  // namespace mvlatent::model
