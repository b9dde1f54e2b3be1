#include "mvlatent/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "mvlatent/adam.hpp"
#include "mvlatent/errors.hpp"

namespace mvlatent::model {
namespace {

Tensor gather_rows_data(const Tensor& a, const std::vector<std::size_t>& rows) {
  Tensor out = Tensor::zeros({rows.size(), a.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = a.data.data() + rows[i] * a.cols();
    double* dst = out.data.data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) dst[j] = src[j];
  }
  return out;
}

void require_finite(double v, const char* term, std::size_t epoch,
                    std::size_t step) {
  if (std::isfinite(v)) return;
  throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                     ", step " + std::to_string(step) + ": " + term +
                     " is not finite");
}

std::vector<const Tensor*> const_ptrs(const std::vector<Tensor*>& params) {
  std::vector<const Tensor*> out;
  out.reserve(params.size());
  for (Tensor* t : params) out.push_back(t);
  return out;
}

std::vector<const Tensor*> leaf_grads(nn::Graph& g,
                                      const std::vector<nn::Value>& leaves) {
  std::vector<const Tensor*> grads;
  grads.reserve(leaves.size());
  for (nn::Value leaf : leaves) grads.push_back(&g.grad(leaf));
  return grads;
}

/// One dropout mask per hidden layer of the spec, in layer order.
std::vector<Tensor> make_net_masks(const nn::MlpSpec& spec, std::size_t n,
                                   nn::Rng& rng) {
  std::vector<Tensor> masks;
  for (int layer = 1; layer + 1 < static_cast<int>(spec.layer_widths.size());
       ++layer) {
    masks.push_back(nn::make_dropout_mask(
        spec.dropout_rate,
        {n, static_cast<std::size_t>(spec.layer_widths[layer])}, rng));
  }
  return masks;
}

/// Consecutive minibatch starts covering [0, n); the trailing partial batch
/// is kept. With fold_singleton, a trailing batch of one row is merged into
/// its predecessor.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(
    std::size_t n, std::size_t minibatch, bool fold_singleton) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t start = 0; start < n; start += minibatch) {
    ranges.emplace_back(start, std::min(minibatch, n - start));
  }
  if (fold_singleton && ranges.size() > 1 && ranges.back().second == 1) {
    ranges.pop_back();
    ranges.back().second += 1;
  }
  return ranges;
}

struct DiscStepResult {
  double loss = 0.0;
  double prob = 0.0;  // mean D(recon) after the update
};

DiscStepResult disc_step(const nn::MlpSpec& spec, nn::ParamSet& params,
                         nn::Adam& adam, const Tensor& real, const Tensor& recon,
                         nn::Rng& mask_rng, const char* term, std::size_t epoch,
                         std::size_t step) {
  std::vector<Tensor> masks = make_net_masks(spec, real.rows(), mask_rng);
  nn::Graph g;
  std::vector<nn::Value> leaves = nn::bind_params(g, params);
  nn::Value loss = build_disc_loss(g, spec, leaves, real, recon, &masks);
  DiscStepResult result;
  result.loss = g.scalar(loss);
  require_finite(result.loss, term, epoch, step);
  g.backward(loss);

  std::vector<Tensor*> targets;
  targets.reserve(params.size());
  for (auto& item : params.items()) targets.push_back(&item.value);
  adam.step(targets, leaf_grads(g, leaves));

  const Tensor p = disc_prob(spec, params, recon);
  double sum = 0.0;
  for (double v : p.data) sum += v;
  result.prob = sum / static_cast<double>(p.data.size());
  return result;
}

}  // namespace

void validate(const TrainConfig& config) {
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate))
    throw ConfigError("train config: learning_rate must be positive and finite");
  if (config.minibatch == 0)
    throw ConfigError("train config: minibatch must be at least 1");
  if (config.mc_samples == 0)
    throw ConfigError("train config: mc_samples must be at least 1");
  if (config.beta < 0.0 || !std::isfinite(config.beta))
    throw ConfigError("train config: beta must be non-negative and finite");
  if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0)
    throw ConfigError("train config: dropout_rate must be in [0, 1)");
}

std::vector<EpochStats> train_vccap(VccapModel& model, const Tensor& x,
                                    const Tensor& y, const TrainConfig& config,
                                    const PriorSpec& prior, GanConfig* gan) {
  validate(config);
  validate_model(model);
  validate(prior, model.z_dim);
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows())
    throw DimensionError("train: x and y must be [n, d] with equal n");
  if (x.rows() == 0) throw InvalidArgument("train: empty training set");
  if (gan != nullptr) validate(*gan, x.cols(), y.cols());

  // Dropout is a training-time property; the config wins over whatever rate
  // the architecture was built with.
  model.encoder_z_spec.dropout_rate = config.dropout_rate;
  model.encoder_hx_spec.dropout_rate = config.dropout_rate;
  model.encoder_hy_spec.dropout_rate = config.dropout_rate;
  model.decoder_x_spec.dropout_rate = config.dropout_rate;
  model.decoder_y_spec.dropout_rate = config.dropout_rate;

  nn::Rng shuffle_rng = nn::derive_rng(config.seed, "shuffle");
  nn::Rng eps_rng = nn::derive_rng(config.seed, "eps");
  nn::Rng dropout_rng = nn::derive_rng(config.seed, "dropout");
  nn::Rng disc_rng = nn::derive_rng(config.seed, "disc_batch");

  nn::AdamConfig adam_config;
  adam_config.lr = config.learning_rate;
  nn::Adam gen_adam(adam_config, const_ptrs(param_tensors(model)));

  std::vector<nn::Adam> disc_adams;
  if (gan != nullptr) {
    auto collect = [](const nn::ParamSet& params) {
      std::vector<const Tensor*> out;
      for (const auto& item : params.items()) out.push_back(&item.value);
      return out;
    };
    disc_adams.emplace_back(adam_config, collect(gan->disc_x));
    disc_adams.emplace_back(adam_config, collect(gan->disc_y));
  }

  ElboWeights weights;
  weights.beta_z = config.beta;
  weights.beta_hx = config.beta;
  weights.beta_hy = config.beta;

  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochStats> history;
  history.reserve(config.epochs);
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochStats stats;
    stats.epoch = epoch;
    std::size_t disc_updates = 0;

    for (const auto& [start, bn] : batch_ranges(n, config.minibatch, false)) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(start + bn));
      const Tensor xb = gather_rows_data(x, batch);
      const Tensor yb = gather_rows_data(y, batch);
      const PriorBatch prior_rows = prior_batch(prior, xb, model.z_dim);
      const ElboDraws draws = make_draws(model, bn, config.mc_samples, eps_rng);
      const VccapMasks masks = make_masks(model, bn, dropout_rng);

      nn::Graph g;
      BoundParams bound = bind_vccap(g, model);
      ElboNodes nodes =
          build_elbo(g, model, bound, xb, yb, draws, weights, prior_rows, &masks);
      nn::Value loss = gan != nullptr ? build_generator_loss(g, nodes, *gan)
                                      : nn::ops::neg(nodes.elbo);

      ++global_step;
      const double kl_z = g.scalar(nodes.kl_z);
      const double kl_hx = nodes.kl_hx.valid() ? g.scalar(nodes.kl_hx) : 0.0;
      const double kl_hy = nodes.kl_hy.valid() ? g.scalar(nodes.kl_hy) : 0.0;
      const double rec_x = g.scalar(nodes.rec_x);
      const double rec_y = g.scalar(nodes.rec_y);
      const double objective = g.scalar(loss);
      require_finite(kl_z, "kl_z", epoch, global_step);
      require_finite(kl_hx, "kl_hx", epoch, global_step);
      require_finite(kl_hy, "kl_hy", epoch, global_step);
      require_finite(rec_x, "rec_x", epoch, global_step);
      require_finite(rec_y, "rec_y", epoch, global_step);
      require_finite(objective, "objective", epoch, global_step);

      g.backward(loss);
      gen_adam.step(param_tensors(model), leaf_grads(g, bound.flat()));

      const double w = static_cast<double>(bn);
      stats.objective += objective * w;
      stats.kl_z += kl_z * w;
      stats.kl_hx += kl_hx * w;
      stats.kl_hy += kl_hy * w;
      stats.rec_x += rec_x * w;
      stats.rec_y += rec_y * w;

      if (gan != nullptr && global_step % gan->disc_update_period == 0) {
        // All discriminator-side randomness lives on its own stream so the
        // generator trajectory is unaffected by the alternation.
        std::vector<std::size_t> disc_batch(gan->disc_minibatch);
        for (std::size_t& idx : disc_batch) idx = disc_rng.index(n);
        const Tensor xd = gather_rows_data(x, disc_batch);
        const Tensor yd = gather_rows_data(y, disc_batch);
        const ElboDraws disc_draws =
            make_draws(model, gan->disc_minibatch, 1, disc_rng);
        const Reconstructions recon = reconstruct_views(model, xd, yd, disc_draws);

        DiscStepResult rx =
            disc_step(gan->disc_x_spec, gan->disc_x, disc_adams[0], xd, recon.x,
                      disc_rng, "disc_x_loss", epoch, global_step);
        DiscStepResult ry =
            disc_step(gan->disc_y_spec, gan->disc_y, disc_adams[1], yd, recon.y,
                      disc_rng, "disc_y_loss", epoch, global_step);
        stats.disc_x_loss += rx.loss;
        stats.disc_y_loss += ry.loss;
        stats.disc_x_prob += rx.prob;
        stats.disc_y_prob += ry.prob;
        ++disc_updates;
      }
    }

    const double total = static_cast<double>(n);
    stats.objective /= total;
    stats.kl_z /= total;
    stats.kl_hx /= total;
    stats.kl_hy /= total;
    stats.rec_x /= total;
    stats.rec_y /= total;
    if (disc_updates > 0) {
      const double d = static_cast<double>(disc_updates);
      stats.disc_x_loss /= d;
      stats.disc_y_loss /= d;
      stats.disc_x_prob /= d;
      stats.disc_y_prob /= d;
    }
    history.push_back(stats);
  }
  return history;
}

std::vector<EpochStats> train_contrastive(ContrastiveModel& model, const Tensor& x,
                                          const Tensor& y,
                                          const TrainConfig& config) {
  validate(config);
  validate_model(model);
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows())
    throw DimensionError("train: x and y must be [n, d] with equal n");
  if (x.rows() < 2)
    throw InvalidArgument("contrastive training needs at least two pairs");

  model.proj_x_spec.dropout_rate = config.dropout_rate;
  model.proj_y_spec.dropout_rate = config.dropout_rate;

  nn::Rng shuffle_rng = nn::derive_rng(config.seed, "shuffle");
  nn::Rng dropout_rng = nn::derive_rng(config.seed, "dropout");
  nn::Rng negatives_rng = nn::derive_rng(config.seed, "negatives");

  nn::AdamConfig adam_config;
  adam_config.lr = config.learning_rate;
  nn::Adam adam(adam_config, const_ptrs(param_tensors(model)));

  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochStats> history;
  history.reserve(config.epochs);
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochStats stats;
    stats.epoch = epoch;

    for (const auto& [start, bn] : batch_ranges(n, config.minibatch, true)) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(start + bn));
      const Tensor xb = gather_rows_data(x, batch);
      const Tensor yb = gather_rows_data(y, batch);
      const std::vector<std::size_t> negatives = pick_negatives(bn, negatives_rng);
      const std::vector<Tensor> masks_x =
          make_net_masks(model.proj_x_spec, bn, dropout_rng);
      const std::vector<Tensor> masks_y =
          make_net_masks(model.proj_y_spec, bn, dropout_rng);

      nn::Graph g;
      std::vector<nn::Value> px = nn::bind_params(g, model.proj_x);
      std::vector<nn::Value> py = nn::bind_params(g, model.proj_y);
      nn::Value loss = build_contrastive_loss(g, model, px, py, xb, yb,
                                              negatives, &masks_x, &masks_y);
      ++global_step;
      const double objective = g.scalar(loss);
      require_finite(objective, "objective", epoch, global_step);

      g.backward(loss);
      std::vector<nn::Value> leaves = px;
      leaves.insert(leaves.end(), py.begin(), py.end());
      adam.step(param_tensors(model), leaf_grads(g, leaves));

      stats.objective += objective * static_cast<double>(bn);
    }

    stats.objective /= static_cast<double>(n);
    history.push_back(stats);
  }
  return history;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr const char* kHistoryHeader =
    "epoch,objective,kl_z,kl_hx,kl_hy,rec_x,rec_y,disc_x_loss,disc_y_loss";

}  // namespace

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = kHistoryHeader;
  out += '\n';
  for (const EpochStats& row : history) {
    out += std::to_string(row.epoch);
    for (double v : {row.objective, row.kl_z, row.kl_hx, row.kl_hy, row.rec_x,
                     row.rec_y, row.disc_x_loss, row.disc_y_loss}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << history_csv(history);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<EpochStats> read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty history file");
  if (line == std::string(kHistoryHeader) + "\r") line.pop_back();
  if (line != kHistoryHeader)
    throw FormatError("unexpected history header: " + line);

  std::vector<EpochStats> history;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9)
      throw FormatError("history line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected 9");
    EpochStats row;
    try {
      row.epoch = std::stoul(fields[0]);
      row.objective = std::stod(fields[1]);
      row.kl_z = std::stod(fields[2]);
      row.kl_hx = std::stod(fields[3]);
      row.kl_hy = std::stod(fields[4]);
      row.rec_x = std::stod(fields[5]);
      row.rec_y = std::stod(fields[6]);
      row.disc_x_loss = std::stod(fields[7]);
      row.disc_y_loss = std::stod(fields[8]);
    } catch (const std::exception&) {
      throw FormatError("history line " + std::to_string(line_no) +
                        " is not numeric: " + line);
    }
    history.push_back(row);
  }
  return history;
}

}  // namespace mvlatent::model
