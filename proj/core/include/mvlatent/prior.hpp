#pragma once

#include <cstdint>

#include "mvlatent/gaussian.hpp"
#include "mvlatent/vcca.hpp"

namespace mvlatent::model {

enum class PriorKind { standard, learned };

/// A frozen narrower-window encoder whose posterior replaces the N(0, I)
/// prior. Its parameters never receive gradients; every evaluation is a
/// plain numeric forward pass.
struct LearnedPrior {
  MlpSpec encoder_spec;
  ParamSet encoder;
  std::size_t w_prior = 0;    // window size the encoder was trained at
  std::size_t frame_dim = 0;  // per-frame width d; encoder input = d * w_prior
};

struct PriorSpec {
  PriorKind kind = PriorKind::standard;
  LearnedPrior learned;  // examined only when kind == learned
};

/// Throws ConfigError when a learned spec is internally inconsistent.
void validate(const PriorSpec& spec, std::size_t z_dim);

/// Columns of the central w_prior-frame block inside W-frame windows
/// ([n, d*W] -> [n, d*w_prior]). Both window sizes must be odd, with
/// w_prior <= W; windows concatenate frames in temporal order.
Tensor central_subwindow(const Tensor& x, std::size_t W, std::size_t w_prior,
                         std::size_t frame_dim);

/// Prior for a single windowed sample (row vector or [1, d*W] tensor):
/// standard -> N(0, I_z); learned -> the frozen encoder's posterior on the
/// central sub-window. Errors when the sample's window is narrower than
/// w_prior.
nn::DiagGaussian prior_for(const PriorSpec& spec, const Tensor& sample_x,
                           std::size_t z_dim);

/// Batch form used by training: empty tensors (standard prior) or [n, z_dim]
/// mean / log-variance constants.
PriorBatch prior_batch(const PriorSpec& spec, const Tensor& x, std::size_t z_dim);

/// Warm start: copy the frozen narrow-window encoder into model.encoder_z.
/// Hidden layers and heads must match shape for shape; the first-layer
/// weight is zero-filled with the frozen block embedded at the central
/// sub-window columns, so at initialization q(z|x) equals the prior exactly.
/// current_w is the model's window size. Throws ConfigError on architecture
/// mismatch.
void warm_start_from_prior(VccapModel& model, const LearnedPrior& prior,
                           std::size_t current_w);

}  // namespace mvlatent::model
