#include "mvlatent/synth.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mvlatent/errors.hpp"
#include "mvlatent/rng.hpp"

namespace mvlatent::data {
namespace {

using nn::Rng;
using nn::Tensor;
using nn::derive_rng;

// Dense [rows, cols] matrix with N(0, scale^2) entries drawn row-major.
Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                     double scale) {
  Tensor m = Tensor::zeros({rows, cols});
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

// out += M * v for M [rows, cols], v length cols.
void add_matvec(std::vector<double>& out, const Tensor& m,
                const std::vector<double>& v) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* row = m.data.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * v[j];
    out[i] += acc;
  }
}

std::string speaker_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "spk%02d", index);
  return buf;
}

std::string utterance_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "utt%03d", index);
  return buf;
}

}  // namespace

void validate(const SynthConfig& config) {
  auto positive = [](int v, const char* what) {
    if (v < 1)
      throw ConfigError(std::string(what) + " must be at least 1, got " +
                        std::to_string(v));
  };
  positive(config.n_speakers, "n_speakers");
  positive(config.utterances_per_speaker, "utterances_per_speaker");
  positive(config.frames_per_utterance, "frames_per_utterance");
  positive(config.z_dim_true, "z_dim_true");
  if (config.n_states < 2)
    throw ConfigError("n_states must be at least 2 (state 0 is silence), got " +
                      std::to_string(config.n_states));
  if (config.hx_dim_true < 0 || config.hy_dim_true < 0)
    throw ConfigError("private latent dimensions must be non-negative");
  if (!(config.self_loop > 0.0) || !(config.self_loop < 1.0))
    throw ConfigError("self_loop must lie strictly between 0 and 1, got " +
                      std::to_string(config.self_loop));
  auto non_negative = [](double v, const char* what) {
    if (!(v >= 0.0))
      throw ConfigError(std::string(what) + " must be non-negative, got " +
                        std::to_string(v));
  };
  non_negative(config.noise_z, "noise_z");
  non_negative(config.noise_x, "noise_x");
  non_negative(config.noise_y, "noise_y");
  non_negative(config.speaker_offset, "speaker_offset");
}

MultiViewCorpus synth_generate(const SynthConfig& config) {
  validate(config);

  const auto n_states = static_cast<std::size_t>(config.n_states);
  const auto z_dim = static_cast<std::size_t>(config.z_dim_true);
  const auto hx_dim = static_cast<std::size_t>(config.hx_dim_true);
  const auto hy_dim = static_cast<std::size_t>(config.hy_dim_true);

  // Fixed model parameters, one sub-stream each so that changing one knob
  // (e.g. the number of utterances) never reshuffles another component.
  Rng mean_rng = derive_rng(config.seed, "state_means");
  std::vector<std::vector<double>> state_means(n_states,
                                               std::vector<double>(z_dim, 0.0));
  // State 0 is silence and keeps a zero mean; others get unit-scale means.
  for (std::size_t s = 1; s < n_states; ++s)
    for (double& v : state_means[s]) v = mean_rng.normal();

  Rng mix_rng = derive_rng(config.seed, "mixing");
  const double z_scale = 1.0 / std::sqrt(static_cast<double>(z_dim));
  const Tensor mix_x = random_matrix(mix_rng, kSynthDx, z_dim, z_scale);
  const Tensor mix_y = random_matrix(mix_rng, kSynthDy, z_dim, z_scale);
  Tensor priv_x, priv_y;
  if (hx_dim > 0)
    priv_x = random_matrix(mix_rng, kSynthDx, hx_dim,
                           1.0 / std::sqrt(static_cast<double>(hx_dim)));
  if (hy_dim > 0)
    priv_y = random_matrix(mix_rng, kSynthDy, hy_dim,
                           1.0 / std::sqrt(static_cast<double>(hy_dim)));

  MultiViewCorpus corpus;
  corpus.d_x = kSynthDx;
  corpus.d_y = kSynthDy;
  corpus.label_alphabet.resize(n_states);
  corpus.label_alphabet[0] = "sil";
  for (std::size_t s = 1; s < n_states; ++s)
    corpus.label_alphabet[s] = "s" + std::to_string(s);

  const auto frames = static_cast<std::size_t>(config.frames_per_utterance);
  for (int spk = 0; spk < config.n_speakers; ++spk) {
    Rng offset_rng =
        derive_rng(config.seed, "speaker_offsets", static_cast<std::uint64_t>(spk));
    std::vector<double> offset_x(kSynthDx), offset_y(kSynthDy);
    for (double& v : offset_x) v = config.speaker_offset * offset_rng.normal();
    for (double& v : offset_y) v = config.speaker_offset * offset_rng.normal();

    for (int utt = 0; utt < config.utterances_per_speaker; ++utt) {
      const auto salt = static_cast<std::uint64_t>(spk) * 1000003u +
                        static_cast<std::uint64_t>(utt);
      Rng chain_rng = derive_rng(config.seed, "chain", salt);
      Rng frame_rng = derive_rng(config.seed, "frames", salt);

      FrameSequence seq;
      seq.speaker_id = speaker_name(spk);
      seq.utterance_id = utterance_name(utt);
      seq.frames_x = Tensor::zeros({frames, kSynthDx});
      seq.frames_y = Tensor::zeros({frames, kSynthDy});
      seq.labels.resize(frames);

      std::size_t state = 0;  // every utterance opens in silence
      std::vector<double> z(z_dim), hx(hx_dim), hy(hy_dim);
      std::vector<double> x(kSynthDx), y(kSynthDy);
      for (std::size_t t = 0; t < frames; ++t) {
        if (t > 0) {
          // Self-loop with probability self_loop, otherwise jump uniformly to
          // one of the other states; the stationary law is uniform.
          if (chain_rng.uniform() >= config.self_loop) {
            std::size_t jump = chain_rng.index(n_states - 1);
            state = jump >= state ? jump + 1 : jump;
          }
        }
        seq.labels[t] = static_cast<int>(state);

        for (std::size_t j = 0; j < z_dim; ++j)
          z[j] = state_means[state][j] + config.noise_z * frame_rng.normal();
        for (std::size_t j = 0; j < hx_dim; ++j) hx[j] = frame_rng.normal();
        for (std::size_t j = 0; j < hy_dim; ++j) hy[j] = frame_rng.normal();

        std::fill(x.begin(), x.end(), 0.0);
        std::fill(y.begin(), y.end(), 0.0);
        add_matvec(x, mix_x, z);
        add_matvec(y, mix_y, z);
        if (config.nonlinear_mixing) {
          for (double& v : x) v = std::tanh(v);
          for (double& v : y) v = std::tanh(v);
        }
        if (hx_dim > 0) add_matvec(x, priv_x, hx);
        if (hy_dim > 0) add_matvec(y, priv_y, hy);
        for (std::size_t j = 0; j < kSynthDx; ++j)
          x[j] += offset_x[j] + config.noise_x * frame_rng.normal();
        for (std::size_t j = 0; j < kSynthDy; ++j)
          y[j] += offset_y[j] + config.noise_y * frame_rng.normal();

        // Quantize through f32 so a saved corpus reloads bit-exactly.
        for (std::size_t j = 0; j < kSynthDx; ++j)
          seq.frames_x.at(t, j) = static_cast<double>(static_cast<float>(x[j]));
        for (std::size_t j = 0; j < kSynthDy; ++j)
          seq.frames_y.at(t, j) = static_cast<double>(static_cast<float>(y[j]));
      }
      corpus.sequences.push_back(std::move(seq));
    }
  }

  data::validate(corpus);
  return corpus;
}

}  // namespace mvlatent::data
