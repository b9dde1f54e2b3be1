#include "mvlatent/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "mvlatent/cca.hpp"
#include "mvlatent/checkpoint.hpp"
#include "mvlatent/contrastive.hpp"
#include "mvlatent/errors.hpp"
#include "mvlatent/experiment.hpp"
#include "mvlatent/gan.hpp"
#include "mvlatent/grad_check.hpp"
#include "mvlatent/pipeline.hpp"
#include "mvlatent/prior.hpp"
#include "mvlatent/probe.hpp"
#include "mvlatent/tensor_ops.hpp"
#include "mvlatent/train.hpp"
#include "mvlatent/vcca.hpp"

namespace mvlatent::cli {
namespace {

namespace fs = std::filesystem;
using model::EpochStats;
using nn::Rng;
using nn::Tensor;

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const IoError*>(&error) != nullptr ||
      dynamic_cast<const FormatError*>(&error) != nullptr) {
    return kExitIoFormat;
  }
  if (dynamic_cast<const ConfigError*>(&error) != nullptr ||
      dynamic_cast<const InvalidArgument*>(&error) != nullptr ||
      dynamic_cast<const DimensionError*>(&error) != nullptr ||
      dynamic_cast<const LookupError*>(&error) != nullptr) {
    return kExitUsage;
  }
  return kExitCheckFailure;  // NumericError and anything unexpected
}

template <typename Body>
int guarded(Body&& body) {
  try {
    return body();
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return exit_code_for(error);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::uint64_t file_fingerprint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return nn::fnv1a64(bytes.data(), bytes.size());
}

std::string hex_digest(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx",
                static_cast<unsigned long long>(value));
  return buffer;
}

std::size_t env_threads() {
  const char* raw = std::getenv("MVLATENT_THREADS");
  if (raw == nullptr || *raw == '\0') return 1;
  const std::string text(raw);
  const bool digits =
      std::all_of(text.begin(), text.end(),
                  [](unsigned char c) { return std::isdigit(c) != 0; });
  unsigned long value = 0;
  if (digits) {
    try {
      value = std::stoul(text);
    } catch (const std::exception&) {
      value = 0;
    }
  }
  if (!digits || value == 0) {
    throw ConfigError("MVLATENT_THREADS must be a positive integer, got \"" +
                      text + "\"");
  }
  return static_cast<std::size_t>(value);
}

/// The experiment's corpus, normalized per config, plus the digest of the
/// exact file bytes it came from. Inline synth configs materialize the
/// corpus into the output directory first so every run leaves a
/// re-loadable data artifact.
struct PreparedData {
  data::MultiViewCorpus corpus;
  std::uint64_t fingerprint = 0;
};

PreparedData prepare_corpus(const io::ExperimentConfig& config,
                            const fs::path& outdir) {
  fs::path corpus_path;
  if (config.synth.has_value()) {
    data::validate(*config.synth);
    data::MultiViewCorpus generated = data::synth_generate(*config.synth);
    fs::create_directories(outdir);
    corpus_path = outdir / "corpus.mvc1";
    data::save_corpus(generated, corpus_path);
  } else if (!config.corpus.empty()) {
    corpus_path = config.corpus;
  } else {
    throw ConfigError("config: either \"corpus\" or \"synth\" must be set");
  }

  PreparedData out;
  out.fingerprint = file_fingerprint(corpus_path);
  out.corpus = data::load_corpus(corpus_path);
  data::validate(out.corpus);
  if (config.normalize) {
    out.corpus = data::normalize_per_speaker(out.corpus, data::View::x);
    if (out.corpus.d_y > 0) {
      out.corpus = data::normalize_per_speaker(out.corpus, data::View::y);
    }
  }
  return out;
}

fs::path require_output_dir(const io::ExperimentConfig& config) {
  if (config.output.empty()) {
    throw ConfigError("config: \"output\" directory is required");
  }
  fs::path outdir = config.output;
  fs::create_directories(outdir);
  return outdir;
}

template <typename Model>
void require_matching_params(const Model& warm, const Model& fresh,
                             const std::string& what) {
  const std::vector<std::string> warm_names = model::param_names(warm);
  const std::vector<std::string> fresh_names = model::param_names(fresh);
  const std::vector<const Tensor*> warm_tensors = model::param_tensors(warm);
  const std::vector<const Tensor*> fresh_tensors = model::param_tensors(fresh);
  bool ok = warm_names == fresh_names && warm_tensors.size() == fresh_tensors.size();
  for (std::size_t i = 0; ok && i < warm_tensors.size(); ++i) {
    ok = warm_tensors[i]->shape == fresh_tensors[i]->shape;
  }
  if (!ok) {
    throw ConfigError("config: " + what +
                      " does not match the configured architecture");
  }
}

io::Checkpoint load_compatible_checkpoint(const fs::path& path,
                                          const io::ExperimentConfig& config,
                                          const std::string& what) {
  io::Checkpoint loaded = io::load_checkpoint(path);
  if (loaded.normalize != config.normalize) {
    throw ConfigError("config: " + what + " " + path.string() + " was trained " +
                      (loaded.normalize ? "with" : "without") +
                      " per-speaker normalization but this run is configured " +
                      (config.normalize ? "with" : "without") + " it");
  }
  return loaded;
}

void write_run_snapshot(const fs::path& outdir, const io::ExperimentConfig& config) {
  write_text(outdir / "resolved_config.json", io::resolved_config_json(config));
}

}  // namespace

int cmd_synth(const SynthArgs& args) {
  return guarded([&]() -> int {
    data::validate(args.config);
    data::MultiViewCorpus corpus = data::synth_generate(args.config);
    if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
    data::save_corpus(corpus, args.out);
    const std::uint64_t digest = file_fingerprint(args.out);
    std::cout << "wrote " << args.out.string() << ": "
              << corpus.sequences.size() << " utterances, "
              << corpus.total_frames() << " frames, d_x=" << corpus.d_x
              << " d_y=" << corpus.d_y << ", digest " << hex_digest(digest)
              << "\n";
    return kExitSuccess;
  });
}

int cmd_train(const TrainArgs& args) {
  return guarded([&]() -> int {
    io::ExperimentConfig config = io::load_experiment_config(args.config);
    if (config.method == "cca") {
      throw ConfigError("config: method \"cca\" is fit by the cca subcommand");
    }
    if (config.method == "baseline-identity") {
      throw ConfigError(
          "config: method \"baseline-identity\" has no parameters to train; "
          "run the probe subcommand directly");
    }
    const fs::path outdir = require_output_dir(config);

    PreparedData prepared = prepare_corpus(config, outdir);
    const data::WindowedView wx =
        data::window_corpus(prepared.corpus, data::View::x, config.window);
    const data::WindowedView wy =
        data::window_corpus(prepared.corpus, data::View::y, config.window);

    io::Checkpoint checkpoint;
    checkpoint.method = config.method;
    checkpoint.window = config.window;
    checkpoint.normalize = config.normalize;
    checkpoint.train = config.train;
    checkpoint.corpus_fingerprint = prepared.fingerprint;

    std::vector<EpochStats> history;
    if (config.method == "contrastive") {
      model::ContrastiveArch arch;
      arch.input_x = wx.features.cols();
      arch.input_y = wy.features.cols();
      arch.feature_dim = config.feature_dim;
      arch.hidden = config.contrastive_hidden;
      arch.margin = config.margin;
      arch.dropout_rate = config.train.dropout_rate;
      Rng init = nn::derive_rng(config.train.seed, "init");
      model::ContrastiveModel net = model::make_contrastive(arch, init);
      if (!config.init_checkpoint.empty()) {
        io::Checkpoint warm = load_compatible_checkpoint(
            config.init_checkpoint, config, "init checkpoint");
        if (warm.method != "contrastive") {
          throw ConfigError("config: init checkpoint holds method \"" +
                            warm.method + "\", expected \"contrastive\"");
        }
        if (warm.window != config.window) {
          throw ConfigError("config: init checkpoint was trained at W=" +
                            std::to_string(warm.window) +
                            " but this run uses W=" +
                            std::to_string(config.window));
        }
        require_matching_params(warm.contrastive, net, "init checkpoint");
        net = warm.contrastive;
      }
      history = model::train_contrastive(net, wx.features, wy.features,
                                         config.train);
      checkpoint.contrastive = std::move(net);
    } else {
      model::ArchConfig arch = config.arch;
      arch.input_x = wx.features.cols();
      arch.input_y = wy.features.cols();
      arch.dropout_rate = config.train.dropout_rate;
      if (config.method == "vcca" && (arch.hx_dim != 0 || arch.hy_dim != 0)) {
        throw ConfigError(
            "config: method \"vcca\" has no private channels; set hx_dim and "
            "hy_dim to 0 or use method \"vccap\"");
      }
      Rng init = nn::derive_rng(config.train.seed, "init");
      model::VccapModel net = model::make_vccap(arch, init);
      if (!config.init_checkpoint.empty()) {
        io::Checkpoint warm = load_compatible_checkpoint(
            config.init_checkpoint, config, "init checkpoint");
        if (!io::vcca_family(warm.method)) {
          throw ConfigError("config: init checkpoint holds method \"" +
                            warm.method +
                            "\", expected a shared-latent generative model");
        }
        if (warm.window != config.window) {
          throw ConfigError("config: init checkpoint was trained at W=" +
                            std::to_string(warm.window) +
                            " but this run uses W=" +
                            std::to_string(config.window));
        }
        require_matching_params(warm.model, net, "init checkpoint");
        net = warm.model;
      }

      model::PriorSpec prior;
      if (!config.prior_checkpoint.empty()) {
        io::Checkpoint narrow = load_compatible_checkpoint(
            config.prior_checkpoint, config, "prior checkpoint");
        if (!io::vcca_family(narrow.method)) {
          throw ConfigError("config: prior checkpoint holds method \"" +
                            narrow.method +
                            "\", expected a shared-latent generative model");
        }
        if (narrow.window >= config.window) {
          throw ConfigError(
              "config: prior checkpoint window W_prior=" +
              std::to_string(narrow.window) +
              " must be narrower than the training window W=" +
              std::to_string(config.window));
        }
        prior.kind = model::PriorKind::learned;
        prior.learned.encoder_spec = narrow.model.encoder_z_spec;
        prior.learned.encoder = narrow.model.encoder_z;
        prior.learned.w_prior = narrow.window;
        prior.learned.frame_dim = prepared.corpus.d_x;
        model::validate(prior, net.z_dim);
        if (config.prior_warm_start) {
          model::warm_start_from_prior(net, prior.learned, config.window);
        }
      }

      if (config.method == "vccap-gan") {
        model::GanConfig gan;
        Rng disc_init = nn::derive_rng(config.train.seed, "disc_init");
        model::DiscArch disc_x;
        disc_x.input = arch.input_x;
        disc_x.hidden = config.disc_hidden;
        disc_x.dropout_rate = config.disc_dropout;
        nn::Mlp dx = model::make_discriminator(disc_x, disc_init);
        model::DiscArch disc_y = disc_x;
        disc_y.input = arch.input_y;
        nn::Mlp dy = model::make_discriminator(disc_y, disc_init);
        gan.disc_x_spec = std::move(dx.spec);
        gan.disc_x = std::move(dx.params);
        gan.disc_y_spec = std::move(dy.spec);
        gan.disc_y = std::move(dy.params);
        gan.lambda1 = config.lambda1;
        gan.lambda2 = config.lambda2;
        gan.disc_minibatch = config.disc_minibatch;
        gan.disc_update_period = config.disc_update_period;
        model::validate(gan, arch.input_x, arch.input_y);
        history = model::train_vccap(net, wx.features, wy.features, config.train,
                                     prior, &gan);
      } else {
        history = model::train_vccap(net, wx.features, wy.features, config.train,
                                     prior);
      }
      checkpoint.model = std::move(net);
    }

    model::write_history_csv(outdir / "history.csv", history);
    io::save_checkpoint(outdir / "checkpoint.ckpt", checkpoint);
    write_run_snapshot(outdir, config);

    std::cout << "trained " << config.method << " (W=" << config.window
              << ") for " << history.size() << " epochs";
    if (!history.empty()) {
      std::cout << ", final objective " << history.back().objective;
    }
    std::cout << "\nwrote " << (outdir / "checkpoint.ckpt").string() << "\n";
    return kExitSuccess;
  });
}

int cmd_extract(const ExtractArgs& args) {
  return guarded([&]() -> int {
    if (args.view != "x" && args.view != "y") {
      throw ConfigError("extract: --view must be \"x\" or \"y\", got \"" +
                        args.view + "\"");
    }
    const data::View view = args.view == "x" ? data::View::x : data::View::y;

    io::Checkpoint checkpoint = io::load_checkpoint(args.checkpoint);
    data::MultiViewCorpus corpus = data::load_corpus(args.corpus);
    data::validate(corpus);
    if (checkpoint.normalize) {
      corpus = data::normalize_per_speaker(corpus, data::View::x);
      if (corpus.d_y > 0) {
        corpus = data::normalize_per_speaker(corpus, data::View::y);
      }
    }

    data::MultiViewCorpus out;
    out.label_alphabet = corpus.label_alphabet;
    std::size_t width = 0;
    for (const data::FrameSequence& seq : corpus.sequences) {
      const Tensor windows = data::window_frames(seq, view, checkpoint.window);
      Tensor features = io::checkpoint_features(checkpoint, windows, view);
      if (args.tandem) {
        const Tensor& base =
            view == data::View::x ? seq.frames_x : seq.frames_y;
        features = data::tandem_concat(features, base);
      }
      width = features.cols();
      data::FrameSequence produced;
      produced.speaker_id = seq.speaker_id;
      produced.utterance_id = seq.utterance_id;
      produced.labels = seq.labels;
      produced.frames_y = Tensor::zeros({features.rows(), 0});
      produced.frames_x = std::move(features);
      out.sequences.push_back(std::move(produced));
    }
    out.d_x = width;
    out.d_y = 0;
    data::validate(out);

    if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
    data::save_corpus(out, args.out);
    std::cout << "wrote " << args.out.string() << ": " << out.total_frames()
              << " frames, " << width << " dims per frame (view " << args.view
              << (args.tandem ? ", tandem" : "") << ")\n";
    return kExitSuccess;
  });
}

int cmd_probe(const ProbeArgs& args) {
  return guarded([&]() -> int {
    io::ExperimentConfig config = io::load_experiment_config(args.config);
    const fs::path outdir = require_output_dir(config);

    eval::ProbeConfig probe = config.probe;
    probe.threads = env_threads();

    data::WindowedView view;
    eval::FeatureExtractor extract;
    std::string method_name = config.method;

    if (!args.features.empty()) {
      data::MultiViewCorpus features = data::load_corpus(args.features);
      data::validate(features);
      view = data::window_corpus(features, data::View::x, 1);
      extract = [](const Tensor& windows) { return windows; };
    } else {
      PreparedData prepared = prepare_corpus(config, outdir);
      view = data::window_corpus(prepared.corpus, data::View::x, config.window);
      if (config.method == "baseline-identity") {
        extract = [](const Tensor& windows) { return windows; };
      } else {
        const fs::path checkpoint_path = args.checkpoint.empty()
                                             ? outdir / "checkpoint.ckpt"
                                             : args.checkpoint;
        io::Checkpoint checkpoint = load_compatible_checkpoint(
            checkpoint_path, config, "checkpoint");
        if (checkpoint.method != config.method) {
          throw ConfigError("config: checkpoint holds method \"" +
                            checkpoint.method + "\" but the config says \"" +
                            config.method + "\"");
        }
        if (checkpoint.window != config.window) {
          throw ConfigError("config: checkpoint was trained at W=" +
                            std::to_string(checkpoint.window) +
                            " but the config says W=" +
                            std::to_string(config.window));
        }
        const std::size_t d_x = prepared.corpus.d_x;
        const std::size_t window = config.window;
        const bool tandem = config.tandem;
        extract = [checkpoint = std::move(checkpoint), d_x, window,
                   tandem](const Tensor& windows) {
          Tensor features =
              io::checkpoint_features(checkpoint, windows, data::View::x);
          if (tandem) {
            const Tensor center =
                nn::t_slice_cols(windows, d_x * (window / 2), d_x);
            features = data::tandem_concat(features, center);
          }
          return features;
        };
      }
    }
    if (config.tandem && config.method != "baseline-identity") {
      method_name += "-tandem";
    }

    const data::FoldPlan plan =
        data::make_folds(view.speaker_ids, config.folds,
                         nn::derive_seed(config.train.seed, "folds", 0));
    const eval::EvalReport report = eval::run_protocol(
        view, plan, extract, probe, method_name, config.window);

    eval::write_report_csv(outdir / "report.csv", report);
    write_text(outdir / "report.md", eval::report_markdown(report));
    write_run_snapshot(outdir, config);

    std::cout << "probe " << method_name << " (W=" << config.window << "): "
              << "average dev error " << report.average_dev_err
              << ", average test error " << report.average_test_err << " over "
              << report.folds.size() << " folds\nwrote "
              << (outdir / "report.csv").string() << "\n";
    return kExitSuccess;
  });
}

namespace {

/// Canonical projections as a single affine layer: output = input * w0^T + b0
/// with w0 = proj^T and b0 = -mean * proj, which equals (input - mean) * proj.
nn::Mlp affine_from_projection(const Tensor& proj, const Tensor& mean) {
  const std::size_t input = proj.rows();
  const std::size_t k = proj.cols();
  nn::MlpSpec spec;
  spec.layer_widths = {static_cast<int>(input), static_cast<int>(k)};
  spec.activation = nn::Activation::linear;
  spec.dropout_rate = 0.0;
  spec.output_heads = nn::OutputHead::single;

  Tensor w0 = Tensor::zeros({k, input});
  for (std::size_t row = 0; row < k; ++row) {
    for (std::size_t col = 0; col < input; ++col) {
      w0.at(row, col) = proj.at(col, row);
    }
  }
  Tensor b0 = Tensor::zeros({k});
  for (std::size_t row = 0; row < k; ++row) {
    double dot = 0.0;
    for (std::size_t col = 0; col < input; ++col) {
      dot += mean.data[col] * proj.at(col, row);
    }
    b0.data[row] = -dot;
  }

  nn::ParamSet params;
  params.add("w0", std::move(w0));
  params.add("b0", std::move(b0));
  return nn::Mlp{std::move(spec), std::move(params)};
}

}  // namespace

int cmd_cca(const CcaArgs& args) {
  return guarded([&]() -> int {
    io::ExperimentConfig config = io::load_experiment_config(args.config);
    if (config.method != "cca") {
      throw ConfigError("config: the cca subcommand requires method \"cca\", got \"" +
                        config.method + "\"");
    }
    const fs::path outdir = require_output_dir(config);

    PreparedData prepared = prepare_corpus(config, outdir);
    const data::WindowedView wx =
        data::window_corpus(prepared.corpus, data::View::x, config.window);
    const data::WindowedView wy =
        data::window_corpus(prepared.corpus, data::View::y, config.window);

    const cca::CcaResult result = cca::linear_cca(
        wx.features, wy.features, config.arch.z_dim, config.cca_reg);

    io::Checkpoint checkpoint;
    checkpoint.method = "cca";
    checkpoint.window = config.window;
    checkpoint.normalize = config.normalize;
    checkpoint.train = config.train;
    checkpoint.corpus_fingerprint = prepared.fingerprint;
    checkpoint.cca_x = affine_from_projection(result.proj_x, result.mean_x);
    checkpoint.cca_y = affine_from_projection(result.proj_y, result.mean_y);
    io::save_checkpoint(outdir / "checkpoint.ckpt", checkpoint);
    write_run_snapshot(outdir, config);

    std::cout << "cca (W=" << config.window << ", k=" << config.arch.z_dim
              << "): top canonical correlations";
    const std::size_t shown = std::min<std::size_t>(result.correlations.size(), 5);
    for (std::size_t i = 0; i < shown; ++i) {
      std::cout << (i == 0 ? " " : ", ") << result.correlations[i];
    }
    std::cout << "\nwrote " << (outdir / "checkpoint.ckpt").string() << "\n";
    return kExitSuccess;
  });
}

namespace {

constexpr double kGradTolerance = 1e-4;

struct CheckOutcome {
  std::string name;
  nn::GradCheckResult result;
  bool pass = false;
};

CheckOutcome run_check(std::string name, const nn::LossBuilder& build,
                       const std::vector<Tensor>& start) {
  CheckOutcome out;
  out.name = std::move(name);
  out.result = nn::grad_check(build, start);
  out.pass = out.result.max_rel_error < kGradTolerance;
  return out;
}

/// Tiny randomized bound fixture shared by the vcca/vccap/vccap-gan checks:
/// fixed data, one Monte Carlo draw, and fixed dropout masks so the
/// objective is a deterministic function of the parameters.
struct BoundFixture {
  model::VccapModel net;
  Tensor x, y;
  model::ElboDraws draws;
  model::VccapMasks masks;
  std::vector<Tensor> start;
};

BoundFixture make_bound_fixture(std::uint64_t seed, std::size_t dims,
                                bool with_private) {
  model::ArchConfig arch;
  arch.input_x = 5;
  arch.input_y = 4;
  arch.z_dim = dims;
  arch.hx_dim = with_private ? 1 : 0;
  arch.hy_dim = with_private ? 2 : 0;
  arch.shared_hidden = {6};
  arch.private_hidden = {5};
  arch.decoder_hidden = {6};
  arch.dropout_rate = 0.2;

  BoundFixture fixture;
  const std::uint64_t salt = with_private ? 1 : 0;
  Rng init = nn::derive_rng(seed, "gradcheck-init", salt);
  fixture.net = model::make_vccap(arch, init);

  const std::size_t n = 3;
  fixture.x = Tensor::zeros({n, arch.input_x});
  fixture.y = Tensor::zeros({n, arch.input_y});
  Rng data_rng = nn::derive_rng(seed, "gradcheck-data", salt);
  data_rng.fill_normal(fixture.x.data.data(), fixture.x.data.size());
  data_rng.fill_normal(fixture.y.data.data(), fixture.y.data.size());

  Rng eps = nn::derive_rng(seed, "gradcheck-eps", salt);
  fixture.draws = model::make_draws(fixture.net, n, 1, eps);
  Rng mask_rng = nn::derive_rng(seed, "gradcheck-mask", salt);
  fixture.masks = model::make_masks(fixture.net, n, mask_rng);
  for (const Tensor* tensor : model::param_tensors(fixture.net)) {
    fixture.start.push_back(*tensor);
  }
  return fixture;
}

CheckOutcome check_bound(std::uint64_t seed, std::size_t dims, bool with_private) {
  const BoundFixture fixture = make_bound_fixture(seed, dims, with_private);
  auto build = [&fixture](nn::Graph& g, const std::vector<nn::Value>& leaves) {
    const model::BoundParams params = model::split_params(fixture.net, leaves);
    const model::ElboNodes nodes =
        model::build_elbo(g, fixture.net, params, fixture.x, fixture.y,
                          fixture.draws, model::ElboWeights{},
                          model::PriorBatch{}, &fixture.masks);
    return nn::ops::neg(nodes.elbo);
  };
  return run_check(with_private ? "vccap bound" : "vcca bound", build,
                   fixture.start);
}

model::GanConfig make_tiny_gan(std::uint64_t seed, std::size_t input_x,
                               std::size_t input_y) {
  model::GanConfig gan;
  Rng disc_init = nn::derive_rng(seed, "gradcheck-disc", 0);
  model::DiscArch disc_x;
  disc_x.input = input_x;
  disc_x.hidden = {6};
  disc_x.dropout_rate = 0.0;
  nn::Mlp dx = model::make_discriminator(disc_x, disc_init);
  model::DiscArch disc_y = disc_x;
  disc_y.input = input_y;
  nn::Mlp dy = model::make_discriminator(disc_y, disc_init);
  gan.disc_x_spec = std::move(dx.spec);
  gan.disc_x = std::move(dx.params);
  gan.disc_y_spec = std::move(dy.spec);
  gan.disc_y = std::move(dy.params);
  gan.lambda1 = 5.0;
  gan.lambda2 = 5.0;
  return gan;
}

CheckOutcome check_generator(std::uint64_t seed, std::size_t dims) {
  const BoundFixture fixture = make_bound_fixture(seed, dims, true);
  const model::GanConfig gan =
      make_tiny_gan(seed, fixture.x.cols(), fixture.y.cols());
  auto build = [&fixture, &gan](nn::Graph& g,
                                const std::vector<nn::Value>& leaves) {
    const model::BoundParams params = model::split_params(fixture.net, leaves);
    const model::ElboNodes nodes =
        model::build_elbo(g, fixture.net, params, fixture.x, fixture.y,
                          fixture.draws, model::ElboWeights{},
                          model::PriorBatch{}, &fixture.masks);
    return model::build_generator_loss(g, nodes, gan);
  };
  return run_check("vccap-gan generator", build, fixture.start);
}

CheckOutcome check_discriminator(std::uint64_t seed, std::size_t dims) {
  const BoundFixture fixture = make_bound_fixture(seed, dims, true);
  const model::GanConfig gan =
      make_tiny_gan(seed, fixture.x.cols(), fixture.y.cols());
  const model::Reconstructions recon = model::reconstruct_views(
      fixture.net, fixture.x, fixture.y, fixture.draws);

  std::vector<Tensor> start;
  for (const auto& item : gan.disc_x.items()) start.push_back(item.value);
  auto build = [&fixture, &gan, &recon](nn::Graph& g,
                                        const std::vector<nn::Value>& leaves) {
    return model::build_disc_loss(g, gan.disc_x_spec, leaves, fixture.x,
                                  recon.x);
  };
  return run_check("vccap-gan discriminator", build, start);
}

CheckOutcome check_contrastive(std::uint64_t seed, std::size_t dims) {
  model::ContrastiveArch arch;
  arch.input_x = 5;
  arch.input_y = 4;
  arch.feature_dim = dims;
  arch.hidden = {6};
  arch.margin = 1.0;
  arch.dropout_rate = 0.2;
  Rng init = nn::derive_rng(seed, "gradcheck-init", 3);
  const model::ContrastiveModel net = model::make_contrastive(arch, init);

  const std::size_t n = 3;
  Tensor x = Tensor::zeros({n, arch.input_x});
  Tensor y = Tensor::zeros({n, arch.input_y});
  Rng data_rng = nn::derive_rng(seed, "gradcheck-data", 3);
  data_rng.fill_normal(x.data.data(), x.data.size());
  data_rng.fill_normal(y.data.data(), y.data.size());
  const std::vector<std::size_t> negatives = {1, 2, 0};

  Rng mask_rng = nn::derive_rng(seed, "gradcheck-mask", 3);
  const std::vector<Tensor> masks_x = {
      nn::make_dropout_mask(arch.dropout_rate, {n, 6}, mask_rng)};
  const std::vector<Tensor> masks_y = {
      nn::make_dropout_mask(arch.dropout_rate, {n, 6}, mask_rng)};

  std::vector<Tensor> start;
  for (const Tensor* tensor : model::param_tensors(net)) start.push_back(*tensor);
  const std::size_t split = net.proj_x.size();
  auto build = [&](nn::Graph& g, const std::vector<nn::Value>& leaves) {
    const std::vector<nn::Value> px(leaves.begin(),
                                    leaves.begin() + static_cast<long>(split));
    const std::vector<nn::Value> py(leaves.begin() + static_cast<long>(split),
                                    leaves.end());
    return model::build_contrastive_loss(g, net, px, py, x, y, negatives,
                                         &masks_x, &masks_y);
  };
  return run_check("contrastive hinge", build, start);
}

}  // namespace

int cmd_gradcheck(const GradcheckArgs& args) {
  return guarded([&]() -> int {
    const std::vector<std::string> known = {"vcca", "vccap", "vccap-gan",
                                            "contrastive", "all"};
    if (std::find(known.begin(), known.end(), args.method) == known.end()) {
      throw ConfigError(
          "gradcheck: unknown method \"" + args.method +
          "\" (expected vcca, vccap, vccap-gan, contrastive, or all)");
    }
    if (args.dims == 0) {
      throw ConfigError("gradcheck: --dims must be at least 1");
    }
    const auto wants = [&](const char* method) {
      return args.method == "all" || args.method == method;
    };

    std::vector<CheckOutcome> outcomes;
    if (wants("vcca")) outcomes.push_back(check_bound(args.seed, args.dims, false));
    if (wants("vccap")) outcomes.push_back(check_bound(args.seed, args.dims, true));
    if (wants("vccap-gan")) {
      outcomes.push_back(check_generator(args.seed, args.dims));
      outcomes.push_back(check_discriminator(args.seed, args.dims));
    }
    if (wants("contrastive")) {
      outcomes.push_back(check_contrastive(args.seed, args.dims));
    }

    bool all_pass = true;
    for (const CheckOutcome& outcome : outcomes) {
      char line[160];
      std::snprintf(line, sizeof line,
                    "%-24s max relative error %.3e over %zu coords "
                    "(tolerance %.0e)  %s",
                    outcome.name.c_str(), outcome.result.max_rel_error,
                    outcome.result.checked_coords, kGradTolerance,
                    outcome.pass ? "PASS" : "FAIL");
      std::cout << line << "\n";
      all_pass = all_pass && outcome.pass;
    }
    return all_pass ? kExitSuccess : kExitCheckFailure;
  });
}

namespace {

struct ComparisonRow {
  std::string method;
  std::size_t window = 0;
  double dev_err = 0.0;
  double test_err = 0.0;
  bool has_terms = false;
  EpochStats final_terms;
  std::string note;
  std::size_t order = 0;  // position in the argument list, for duplicate flagging
};

std::string format_g(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string format_f4(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.4f", value);
  return buffer;
}

std::string format_g6(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6g", value);
  return buffer;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out =
      "method,W,avg_dev_err,avg_test_err,final_objective,final_kl_z,"
      "final_rec_x,final_rec_y,note\n";
  for (const ComparisonRow& row : rows) {
    out += row.method + "," + std::to_string(row.window) + "," +
           format_g(row.dev_err) + "," + format_g(row.test_err) + ",";
    if (row.has_terms) {
      out += format_g(row.final_terms.objective) + "," +
             format_g(row.final_terms.kl_z) + "," +
             format_g(row.final_terms.rec_x) + "," +
             format_g(row.final_terms.rec_y);
    } else {
      out += ",,,";
    }
    out += "," + row.note + "\n";
  }
  return out;
}

std::string comparison_markdown(const std::vector<ComparisonRow>& rows,
                                const std::vector<std::string>& incomplete) {
  std::string out = "## Method comparison\n\n";
  if (!rows.empty()) {
    out +=
        "| method | W | avg dev err | avg test err | final objective | "
        "final kl_z | final rec_x | final rec_y | note |\n"
        "|---|---|---|---|---|---|---|---|---|\n";
    for (const ComparisonRow& row : rows) {
      out += "| " + row.method + " | " + std::to_string(row.window) + " | " +
             format_f4(row.dev_err) + " | " + format_f4(row.test_err) + " | ";
      if (row.has_terms) {
        out += format_g6(row.final_terms.objective) + " | " +
               format_g6(row.final_terms.kl_z) + " | " +
               format_g6(row.final_terms.rec_x) + " | " +
               format_g6(row.final_terms.rec_y) + " | ";
      } else {
        out += " | | | | ";
      }
      out += row.note + " |\n";
    }
  } else {
    out += "No completed runs.\n";
  }
  if (!incomplete.empty()) {
    out += "\n## Incomplete runs\n\n";
    for (const std::string& entry : incomplete) {
      out += "- " + entry + "\n";
    }
  }
  return out;
}

}  // namespace

int cmd_report(const ReportArgs& args) {
  return guarded([&]() -> int {
    if (args.runs.empty()) {
      throw ConfigError("report: at least one run directory is required");
    }

    std::vector<ComparisonRow> rows;
    std::vector<std::string> incomplete;
    for (std::size_t i = 0; i < args.runs.size(); ++i) {
      const fs::path& dir = args.runs[i];
      const fs::path report_path = dir / "report.csv";
      if (!fs::exists(report_path)) {
        incomplete.push_back(dir.string() + " (missing report.csv)");
        continue;
      }
      ComparisonRow row;
      row.order = i;
      try {
        const eval::EvalReport report = eval::read_report_csv(report_path);
        row.method = report.method;
        row.window = report.window;
        row.dev_err = report.average_dev_err;
        row.test_err = report.average_test_err;
      } catch (const std::exception& error) {
        incomplete.push_back(dir.string() + " (" + error.what() + ")");
        continue;
      }
      const fs::path history_path = dir / "history.csv";
      if (fs::exists(history_path)) {
        try {
          const std::vector<EpochStats> history =
              model::read_history_csv(history_path);
          if (!history.empty()) {
            row.has_terms = true;
            row.final_terms = history.back();
          }
        } catch (const std::exception&) {
          row.note = "history unreadable";
        }
      }
      rows.push_back(std::move(row));
    }

    // Flag repeated method+W combinations: the earliest run keeps its note,
    // every later one is marked a duplicate (both stay in the table).
    std::map<std::pair<std::string, std::size_t>, std::size_t> first_seen;
    for (ComparisonRow& row : rows) {
      const auto key = std::make_pair(row.method, row.window);
      auto [it, inserted] = first_seen.emplace(key, row.order);
      if (!inserted && it->second != row.order) {
        row.note = row.note.empty() ? "duplicate" : row.note + "; duplicate";
      }
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) {
                       if (a.window != b.window) return a.window < b.window;
                       return a.method < b.method;
                     });

    fs::create_directories(args.out_dir);
    const std::string markdown = comparison_markdown(rows, incomplete);
    write_text(args.out_dir / "comparison.csv", comparison_csv(rows));
    write_text(args.out_dir / "comparison.md", markdown);
    std::cout << markdown;
    for (const std::string& entry : incomplete) {
      std::cerr << "incomplete: " << entry << "\n";
    }
    return incomplete.empty() ? kExitSuccess : kExitCheckFailure;
  });
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"mvlatent: multi-view latent representation toolkit"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic two-view corpus");
  synth->add_option("--speakers", synth_args.config.n_speakers, "Number of speakers");
  synth->add_option("--utts", synth_args.config.utterances_per_speaker,
                    "Utterances per speaker");
  synth->add_option("--frames", synth_args.config.frames_per_utterance,
                    "Frames per utterance");
  synth->add_option("--states", synth_args.config.n_states,
                    "Markov states (label classes)");
  synth->add_option("--zdim", synth_args.config.z_dim_true, "True shared latent width");
  synth->add_option("--hxdim", synth_args.config.hx_dim_true,
                    "True private width, view x");
  synth->add_option("--hydim", synth_args.config.hy_dim_true,
                    "True private width, view y");
  synth->add_option("--noise", synth_args.config.noise_x, "Observation noise, view x");
  synth->add_option("--seed", synth_args.config.seed, "Generator seed");
  synth->add_option("--out", synth_args.out, "Output corpus path")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model from an experiment config");
  train->add_option("--config", train_args.config, "Experiment config JSON")->required();

  ExtractArgs extract_args;
  CLI::App* extract =
      app.add_subcommand("extract", "Extract per-frame features with a checkpoint");
  extract->add_option("--checkpoint", extract_args.checkpoint, "Checkpoint path")
      ->required();
  extract->add_option("--corpus", extract_args.corpus, "Input corpus path")->required();
  extract->add_option("--out", extract_args.out, "Output feature corpus path")
      ->required();
  extract->add_option("--view", extract_args.view, "View to embed: x or y");
  extract->add_flag("--tandem", extract_args.tandem,
                    "Concatenate features with the raw view frames");

  ProbeArgs probe_args;
  CLI::App* probe =
      app.add_subcommand("probe", "Evaluate features with the linear probe protocol");
  probe->add_option("--config", probe_args.config, "Experiment config JSON")->required();
  probe->add_option("--features", probe_args.features,
                    "Pre-extracted feature corpus (skips the checkpoint)");
  probe->add_option("--checkpoint", probe_args.checkpoint,
                    "Checkpoint path (default: <output>/checkpoint.ckpt)");

  CcaArgs cca_args;
  CLI::App* cca_cmd = app.add_subcommand("cca", "Fit linear canonical projections");
  cca_cmd->add_option("--config", cca_args.config, "Experiment config JSON")->required();

  GradcheckArgs grad_args;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gradcheck->add_option("--method", grad_args.method,
                        "vcca | vccap | vccap-gan | contrastive | all");
  gradcheck->add_option("--dims", grad_args.dims, "Latent width of the tiny models");
  gradcheck->add_option("--seed", grad_args.seed, "Fixture seed");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "Summarize completed runs");
  report->add_option("runs", report_args.runs, "Run directories")->required();
  report->add_option("--out", report_args.out_dir, "Directory for the comparison files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? kExitSuccess : kExitUsage;
  }

  if (synth->parsed()) return cmd_synth(synth_args);
  if (train->parsed()) return cmd_train(train_args);
  if (extract->parsed()) return cmd_extract(extract_args);
  if (probe->parsed()) return cmd_probe(probe_args);
  if (cca_cmd->parsed()) return cmd_cca(cca_args);
  if (gradcheck->parsed()) return cmd_gradcheck(grad_args);
  if (report->parsed()) return cmd_report(report_args);
  return kExitUsage;  // unreachable: require_subcommand(1) enforces a choice
}

}  // namespace mvlatent::cli
