#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvlatent/probe.hpp"
#include "mvlatent/synth.hpp"
#include "mvlatent/train.hpp"
#include "mvlatent/vcca.hpp"

namespace mvlatent::io {

/// One experiment, fully resolved: data source, method, architecture,
/// training settings, evaluation settings, output directory. Parsed from a
/// strict JSON document — unknown keys anywhere are rejected — and
/// serializable back to JSON such that re-parsing reproduces the struct
/// exactly (resolved-config snapshots).
struct ExperimentConfig {
  std::string method;  // vcca | vccap | vccap-gan | contrastive | cca | baseline-identity

  // Data: exactly one of corpus (an MVC1 path) or synth (inline generator).
  std::string corpus;
  std::optional<data::SynthConfig> synth;
  std::size_t window = 7;  // W, odd
  bool normalize = true;   // per-speaker mean/variance normalization, both views

  // Architecture (input widths are derived from the corpus at run time).
  model::ArchConfig arch;

  // Training (includes beta, dropout_rate, and the master seed).
  model::TrainConfig train;

  // Prior: empty checkpoint path = standard N(0, I).
  std::string prior_checkpoint;
  bool prior_warm_start = true;

  // Optional full-model warm start (e.g. vccap-gan from a trained vccap).
  std::string init_checkpoint;

  // Adversarial extension (method == vccap-gan).
  double lambda1 = 5.0;
  double lambda2 = 5.0;
  std::vector<int> disc_hidden = {2048, 1500, 1500};
  double disc_dropout = 0.2;
  std::size_t disc_minibatch = 1800;
  std::size_t disc_update_period = 9;

  // Contrastive baseline (method == contrastive).
  std::size_t feature_dim = 50;
  std::vector<int> contrastive_hidden = {1500, 1500, 1500};
  double margin = 1.0;

  // Classical CCA (method == cca).
  double cca_reg = 1e-4;

  // Downstream probe protocol.
  eval::ProbeConfig probe;
  std::size_t folds = 6;
  bool tandem = false;  // concatenate learned features with raw center frames

  // Output directory for checkpoints, histories, reports, snapshots.
  std::string output;
};

/// Throws ConfigError on an unknown method, even window, or a corpus/synth
/// conflict (both set). Field-level settings are validated by the modules
/// that consume them.
void validate(const ExperimentConfig& config);

/// Strict parse: JSON syntax errors raise FormatError; schema violations
/// (unknown keys, wrong types, bad enum values) raise ConfigError.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Full snapshot of every field; parse_experiment_config(resolved_config_json(c))
/// reproduces c exactly.
std::string resolved_config_json(const ExperimentConfig& config);

}  // namespace mvlatent::io
