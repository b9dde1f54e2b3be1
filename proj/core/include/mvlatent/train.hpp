#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvlatent/contrastive.hpp"
#include "mvlatent/gan.hpp"
#include "mvlatent/prior.hpp"
#include "mvlatent/vcca.hpp"

namespace mvlatent::model {

/// Optimizer-facing hyperparameters. dropout_rate overrides the rate stored
/// in every net spec of the model for the duration of training (and stays on
/// the model afterwards); evaluation paths never apply dropout regardless.
struct TrainConfig {
  double learning_rate = 0.0001;
  std::size_t minibatch = 200;
  std::size_t epochs = 0;
  std::size_t mc_samples = 1;
  double beta = 1.0;  // weight on every KL term
  double dropout_rate = 0.2;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on out-of-range values.
void validate(const TrainConfig& config);

/// One row of training history. objective is the sample-weighted epoch mean
/// of the exact minimized loss (negated bound, plus adversarial terms when
/// active); the kl_* / rec_* columns are raw unweighted term means. The
/// disc_* entries average over the discriminator updates that fell in the
/// epoch (zero when none did). disc_*_prob is the mean discriminator
/// probability assigned to reconstructions right after each update; it is
/// reported for monitoring and is not part of the CSV contract.
struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double objective = 0.0;
  double kl_z = 0.0;
  double kl_hx = 0.0;
  double kl_hy = 0.0;
  double rec_x = 0.0;
  double rec_y = 0.0;
  double disc_x_loss = 0.0;
  double disc_y_loss = 0.0;
  double disc_x_prob = 0.0;
  double disc_y_prob = 0.0;
};

/// Minibatch Adam on the (possibly private-augmented) bound over aligned,
/// already windowed and normalized view matrices x [n, d_x*W], y [n, d_y*W].
///
/// All randomness derives from config.seed through fixed named streams
/// ("shuffle", "eps", "dropout", "disc_batch"), so runs are reproducible
/// bit for bit and the generator-side streams are untouched by whether a
/// discriminator is attached. Epochs shuffle the row order; every minibatch
/// is used, including a trailing partial one.
///
/// With gan attached, discriminators take one Adam step every
/// gan->disc_update_period generator steps on gan->disc_minibatch rows drawn
/// with replacement; their reconstruction targets are decoder means computed
/// without dropout from fresh draws on the "disc_batch" stream, entering the
/// discriminator loss as constants. With lambda1 = lambda2 = 0 the generator
/// trajectory is bitwise identical to a run without gan.
///
/// Throws NumericError naming the first non-finite term if the objective
/// diverges. Zero-epoch configs return an empty history and leave the model
/// at initialization.
std::vector<EpochStats> train_vccap(VccapModel& model, const Tensor& x,
                                    const Tensor& y, const TrainConfig& config,
                                    const PriorSpec& prior = {},
                                    GanConfig* gan = nullptr);

/// Margin-loss training of the two projection nets. Negatives are resampled
/// within each minibatch every epoch from the "negatives" stream; a trailing
/// singleton minibatch is folded into its predecessor since a lone pair has
/// no negative. beta and mc_samples are ignored.
std::vector<EpochStats> train_contrastive(ContrastiveModel& model, const Tensor& x,
                                          const Tensor& y,
                                          const TrainConfig& config);

/// History serialization: header plus one row per epoch, columns exactly
/// epoch, objective, kl_z, kl_hx, kl_hy, rec_x, rec_y, disc_x_loss,
/// disc_y_loss. Values round-trip through text exactly.
std::string history_csv(const std::vector<EpochStats>& history);
void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochStats>& history);
std::vector<EpochStats> read_history_csv(const std::filesystem::path& path);

}  // namespace mvlatent::model
