#include "mvlatent/prior.hpp"

#include <string>

#include "mvlatent/errors.hpp"
#include "mvlatent/tensor_ops.hpp"

namespace mvlatent::model {

void validate(const PriorSpec& spec, std::size_t z_dim) {
  if (spec.kind == PriorKind::standard) return;
  const LearnedPrior& lp = spec.learned;
  nn::validate(lp.encoder_spec);
  if (lp.encoder_spec.output_heads != nn::OutputHead::mean_and_logvar)
    throw ConfigError("learned prior: the frozen encoder must expose mean and "
                      "log-variance heads");
  if (lp.encoder_spec.output_width() != static_cast<int>(z_dim))
    throw ConfigError("learned prior: frozen encoder emits width " +
                      std::to_string(lp.encoder_spec.output_width()) +
                      " but the model's z_dim is " + std::to_string(z_dim));
  if (lp.w_prior == 0 || lp.w_prior % 2 == 0)
    throw ConfigError("learned prior: w_prior must be odd and positive, got " +
                      std::to_string(lp.w_prior));
  if (lp.frame_dim == 0)
    throw ConfigError("learned prior: frame_dim must be positive");
  if (lp.encoder_spec.input_width() !=
      static_cast<int>(lp.frame_dim * lp.w_prior))
    throw ConfigError("learned prior: encoder input width " +
                      std::to_string(lp.encoder_spec.input_width()) +
                      " is not frame_dim * w_prior = " +
                      std::to_string(lp.frame_dim * lp.w_prior));
}

Tensor central_subwindow(const Tensor& x, std::size_t W, std::size_t w_prior,
                         std::size_t frame_dim) {
  if (W % 2 == 0 || w_prior % 2 == 0)
    throw InvalidArgument("central_subwindow: window sizes must be odd");
  if (w_prior > W)
    throw InvalidArgument("central_subwindow: the window (" + std::to_string(W) +
                          " frames) is narrower than the prior's window (" +
                          std::to_string(w_prior) + " frames)");
  if (x.rank() != 2 || x.cols() != frame_dim * W)
    throw DimensionError("central_subwindow: input must be [n, " +
                         std::to_string(frame_dim * W) + "], got " +
                         nn::shape_string(x.shape));
  const std::size_t offset = frame_dim * ((W - w_prior) / 2);
  return nn::t_slice_cols(x, offset, frame_dim * w_prior);
}

nn::DiagGaussian prior_for(const PriorSpec& spec, const Tensor& sample_x,
                           std::size_t z_dim) {
  if (spec.kind == PriorKind::standard) return nn::DiagGaussian::standard(z_dim);
  validate(spec, z_dim);
  const LearnedPrior& lp = spec.learned;

  Tensor row = sample_x;
  if (row.rank() == 1) row = row.reshaped({1, row.data.size()});
  if (row.rank() != 2 || row.rows() != 1)
    throw DimensionError("prior_for: expected a single windowed sample");
  if (row.cols() % lp.frame_dim != 0)
    throw DimensionError("prior_for: sample width " + std::to_string(row.cols()) +
                         " is not a multiple of frame_dim " +
                         std::to_string(lp.frame_dim));
  const std::size_t W = row.cols() / lp.frame_dim;
  if (W % 2 == 0)
    throw InvalidArgument("prior_for: sample covers an even window of " +
                          std::to_string(W) + " frames");
  Tensor central = central_subwindow(row, W, lp.w_prior, lp.frame_dim);
  nn::MlpOutput out = nn::forward_mlp(lp.encoder_spec, lp.encoder, central);
  return nn::DiagGaussian(out.first.reshaped({z_dim}),
                          out.second.reshaped({z_dim}));
}

PriorBatch prior_batch(const PriorSpec& spec, const Tensor& x, std::size_t z_dim) {
  PriorBatch batch;
  if (spec.kind == PriorKind::standard) return batch;
  validate(spec, z_dim);
  const LearnedPrior& lp = spec.learned;
  if (x.rank() != 2 || x.cols() % lp.frame_dim != 0)
    throw DimensionError("prior_batch: input must be [n, d*W] with d = " +
                         std::to_string(lp.frame_dim));
  const std::size_t W = x.cols() / lp.frame_dim;
  if (W % 2 == 0)
    throw InvalidArgument("prior_batch: input covers an even window of " +
                          std::to_string(W) + " frames");
  Tensor central = central_subwindow(x, W, lp.w_prior, lp.frame_dim);
  nn::MlpOutput out = nn::forward_mlp(lp.encoder_spec, lp.encoder, central);
  batch.mean = std::move(out.first);
  batch.log_var = std::move(out.second);
  return batch;
}

void warm_start_from_prior(VccapModel& model, const LearnedPrior& prior,
                           std::size_t current_w) {
  validate(PriorSpec{PriorKind::learned, prior}, model.z_dim);
  const MlpSpec& target = model.encoder_z_spec;
  const MlpSpec& source = prior.encoder_spec;
  if (current_w % 2 == 0 || current_w < prior.w_prior)
    throw ConfigError("warm start: the model's window (" +
                      std::to_string(current_w) +
                      ") must be odd and at least w_prior (" +
                      std::to_string(prior.w_prior) + ")");
  if (target.input_width() != static_cast<int>(prior.frame_dim * current_w))
    throw ConfigError("warm start: encoder input width " +
                      std::to_string(target.input_width()) +
                      " is not frame_dim * W = " +
                      std::to_string(prior.frame_dim * current_w));
  if (target.layer_widths.size() != source.layer_widths.size() ||
      target.output_heads != source.output_heads ||
      target.activation != source.activation)
    throw ConfigError("warm start: encoder architectures differ in depth, "
                      "activation, or head kind");
  for (std::size_t i = 1; i < target.layer_widths.size(); ++i) {
    if (target.layer_widths[i] != source.layer_widths[i])
      throw ConfigError("warm start: hidden/output widths differ at layer " +
                        std::to_string(i));
  }

  const std::size_t col_offset =
      prior.frame_dim * ((current_w - prior.w_prior) / 2);
  // Weights of the first affine layer consume the raw window; with no hidden
  // layers that role falls to the head weights themselves.
  auto consumes_input = [&source](const std::string& name) {
    if (source.hidden_count() > 0) return name == "w0";
    return name == "w_mean" || name == "w_logvar";
  };
  for (const auto& item : prior.encoder.items()) {
    Tensor& dst = model.encoder_z.at(item.name);
    const Tensor& src = item.value;
    if (consumes_input(item.name)) {
      // First layer: embed the frozen weights at the central sub-window
      // columns, zero elsewhere, so the warm model reproduces the prior's
      // posterior exactly at initialization.
      dst = Tensor::zeros(dst.shape);
      const std::size_t rows = src.rows();
      const std::size_t src_cols = src.cols();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < src_cols; ++j)
          dst.at(i, col_offset + j) = src.at(i, j);
    } else {
      if (dst.shape != src.shape)
        throw ConfigError("warm start: parameter " + item.name +
                          " has mismatched shape");
      dst = src;
    }
  }
}

}  // namespace mvlatent::model
