#pragma once

#include <cstdint>

#include "mvlatent/corpus.hpp"

namespace mvlatent::data {

/// Observed view widths of the generator: the x view mirrors a 39-dimensional
/// acoustic-style vector, the y view a 16-dimensional articulatory-style one.
inline constexpr std::size_t kSynthDx = 39;
inline constexpr std::size_t kSynthDy = 16;

/// Two-view generative story: a Markov state sequence (state 0 = silence,
/// entered at each utterance start) selects a shared latent z; each view adds
/// its own private latent, a fixed per-speaker offset, and isotropic noise.
struct SynthConfig {
  int n_speakers = 12;
  int utterances_per_speaker = 6;
  int frames_per_utterance = 400;
  int n_states = 8;  // includes the silence state
  int z_dim_true = 6;
  int hx_dim_true = 2;
  int hy_dim_true = 2;
  double self_loop = 0.7;      // state transition self-loop probability
  bool nonlinear_mixing = true;  // tanh on the shared-latent channel
  double noise_z = 0.1;
  double noise_x = 0.4;
  double noise_y = 0.1;
  double speaker_offset = 0.5;  // scale of fixed per-speaker shifts
  std::uint64_t seed = 1234;
};

/// Throws ConfigError on invalid settings.
void validate(const SynthConfig& config);

/// Fully deterministic given the seed; emitted frame values are quantized to
/// 32-bit floats so saved corpora round-trip bit-exactly. Labels are the
/// Markov states.
MultiViewCorpus synth_generate(const SynthConfig& config);

}  // namespace mvlatent::data
