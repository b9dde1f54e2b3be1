#include "mvlatent/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mvlatent/errors.hpp"

namespace mvlatent::io {

using nlohmann::json;

namespace {

const std::set<std::string>& known_experiment_methods() {
  static const std::set<std::string> methods = {
      "vcca", "vccap", "vccap-gan", "contrastive", "cca", "baseline-identity"};
  return methods;
}

[[noreturn]] void bad_type(const std::string& where, const char* expected) {
  throw ConfigError("config: \"" + where + "\" must be " + expected);
}

/// Strict reader over one JSON object: every key must be consumed by a
/// read_* call, otherwise finish() names the stray key.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) {
      throw ConfigError("config: \"" + where_ + "\" must be an object");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void read_string(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) bad_type(path(key), "a string");
    out = v.get<std::string>();
  }

  void read_bool(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) bad_type(path(key), "a boolean");
    out = v.get<bool>();
  }

  void read_double(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) bad_type(path(key), "a number");
    out = v.get<double>();
  }

  template <typename T>
  void read_unsigned(const char* key, T& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!(v.is_number_unsigned() ||
          (v.is_number_integer() && v.get<std::int64_t>() >= 0))) {
      bad_type(path(key), "a nonnegative integer");
    }
    out = v.get<T>();
  }

  void read_int(const char* key, int& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      bad_type(path(key), "an integer");
    }
    out = v.get<int>();
  }

  void read_int_list(const char* key, std::vector<int>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) bad_type(path(key), "an array of integers");
    std::vector<int> values;
    for (const json& item : v) {
      if (!item.is_number_integer() && !item.is_number_unsigned()) {
        bad_type(path(key), "an array of integers");
      }
      values.push_back(item.get<int>());
    }
    out = std::move(values);
  }

  void read_double_list(const char* key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) bad_type(path(key), "an array of numbers");
    std::vector<double> values;
    for (const json& item : v) {
      if (!item.is_number()) bad_type(path(key), "an array of numbers");
      values.push_back(item.get<double>());
    }
    out = std::move(values);
  }

  const json* object(const char* key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  std::string path(const char* key) const {
    return where_.empty() ? std::string(key) : where_ + "." + key;
  }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.find(it.key()) == seen_.end()) {
        throw ConfigError("config: unknown key \"" + path(it.key().c_str()) + "\"");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void parse_arch(const json& j, model::ArchConfig& arch) {
  StrictObject obj(j, "arch");
  obj.read_unsigned("z_dim", arch.z_dim);
  obj.read_unsigned("hx_dim", arch.hx_dim);
  obj.read_unsigned("hy_dim", arch.hy_dim);
  obj.read_int_list("shared_hidden", arch.shared_hidden);
  obj.read_int_list("private_hidden", arch.private_hidden);
  obj.read_int_list("decoder_hidden", arch.decoder_hidden);
  obj.read_double("sigma_x", arch.sigma_x);
  obj.read_double("sigma_y", arch.sigma_y);
  std::string activation;
  obj.read_string("activation", activation);
  if (!activation.empty()) {
    if (activation == "relu") {
      arch.activation = nn::Activation::relu;
    } else if (activation == "linear") {
      arch.activation = nn::Activation::linear;
    } else {
      throw ConfigError("config: arch.activation must be \"relu\" or \"linear\", got \"" +
                        activation + "\"");
    }
  }
  obj.finish();
}

void parse_train(const json& j, model::TrainConfig& train) {
  StrictObject obj(j, "train");
  obj.read_double("learning_rate", train.learning_rate);
  obj.read_unsigned("minibatch", train.minibatch);
  obj.read_unsigned("epochs", train.epochs);
  obj.read_unsigned("mc_samples", train.mc_samples);
  obj.read_double("beta", train.beta);
  obj.read_double("dropout_rate", train.dropout_rate);
  obj.read_unsigned("seed", train.seed);
  obj.finish();
}

void parse_synth(const json& j, data::SynthConfig& synth) {
  StrictObject obj(j, "synth");
  obj.read_int("speakers", synth.n_speakers);
  obj.read_int("utterances", synth.utterances_per_speaker);
  obj.read_int("frames", synth.frames_per_utterance);
  obj.read_int("states", synth.n_states);
  obj.read_int("z_dim", synth.z_dim_true);
  obj.read_int("hx_dim", synth.hx_dim_true);
  obj.read_int("hy_dim", synth.hy_dim_true);
  obj.read_double("self_loop", synth.self_loop);
  obj.read_bool("nonlinear_mixing", synth.nonlinear_mixing);
  obj.read_double("noise_z", synth.noise_z);
  obj.read_double("noise_x", synth.noise_x);
  obj.read_double("noise_y", synth.noise_y);
  obj.read_double("speaker_offset", synth.speaker_offset);
  obj.read_unsigned("seed", synth.seed);
  obj.finish();
}

void parse_probe(const json& j, ExperimentConfig& config) {
  StrictObject obj(j, "probe");
  obj.read_double_list("l2_grid", config.probe.l2_grid);
  obj.read_unsigned("epochs", config.probe.epochs);
  obj.read_unsigned("seed", config.probe.seed);
  obj.read_unsigned("folds", config.folds);
  obj.read_bool("tandem", config.tandem);
  obj.finish();
}

}  // namespace

void validate(const ExperimentConfig& config) {
  if (known_experiment_methods().find(config.method) ==
      known_experiment_methods().end()) {
    throw ConfigError("config: unknown method \"" + config.method +
                      "\" (expected vcca, vccap, vccap-gan, contrastive, cca, or "
                      "baseline-identity)");
  }
  if (config.window == 0 || config.window % 2 == 0) {
    throw ConfigError("config: window must be odd, got " +
                      std::to_string(config.window));
  }
  if (!config.corpus.empty() && config.synth.has_value()) {
    throw ConfigError("config: corpus and synth are mutually exclusive");
  }
  if (config.synth.has_value()) data::validate(*config.synth);
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: the top level must be an object");

  ExperimentConfig config;
  StrictObject obj(j, "");
  obj.read_string("method", config.method);
  if (config.method.empty()) throw ConfigError("config: \"method\" is required");
  obj.read_string("corpus", config.corpus);
  if (const json* synth = obj.object("synth")) {
    data::SynthConfig s;
    parse_synth(*synth, s);
    config.synth = s;
  }
  obj.read_unsigned("window", config.window);
  obj.read_bool("normalize", config.normalize);
  if (const json* arch = obj.object("arch")) parse_arch(*arch, config.arch);
  if (const json* train = obj.object("train")) parse_train(*train, config.train);
  if (const json* prior = obj.object("prior")) {
    StrictObject p(*prior, "prior");
    p.read_string("checkpoint", config.prior_checkpoint);
    p.read_bool("warm_start", config.prior_warm_start);
    p.finish();
  }
  obj.read_string("init_checkpoint", config.init_checkpoint);
  if (const json* gan = obj.object("gan")) {
    StrictObject g(*gan, "gan");
    g.read_double("lambda1", config.lambda1);
    g.read_double("lambda2", config.lambda2);
    g.read_int_list("disc_hidden", config.disc_hidden);
    g.read_double("disc_dropout", config.disc_dropout);
    g.read_unsigned("disc_minibatch", config.disc_minibatch);
    g.read_unsigned("disc_update_period", config.disc_update_period);
    g.finish();
  }
  if (const json* contrastive = obj.object("contrastive")) {
    StrictObject c(*contrastive, "contrastive");
    c.read_unsigned("feature_dim", config.feature_dim);
    c.read_int_list("hidden", config.contrastive_hidden);
    c.read_double("margin", config.margin);
    c.finish();
  }
  if (const json* cca = obj.object("cca")) {
    StrictObject c(*cca, "cca");
    c.read_double("reg", config.cca_reg);
    c.finish();
  }
  if (const json* probe = obj.object("probe")) parse_probe(*probe, config);
  obj.read_string("output", config.output);
  obj.finish();

  validate(config);
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return parse_experiment_config(buffer.str());
}

std::string resolved_config_json(const ExperimentConfig& config) {
  json j;
  j["method"] = config.method;
  if (config.synth.has_value()) {
    const data::SynthConfig& s = *config.synth;
    json synth;
    synth["speakers"] = s.n_speakers;
    synth["utterances"] = s.utterances_per_speaker;
    synth["frames"] = s.frames_per_utterance;
    synth["states"] = s.n_states;
    synth["z_dim"] = s.z_dim_true;
    synth["hx_dim"] = s.hx_dim_true;
    synth["hy_dim"] = s.hy_dim_true;
    synth["self_loop"] = s.self_loop;
    synth["nonlinear_mixing"] = s.nonlinear_mixing;
    synth["noise_z"] = s.noise_z;
    synth["noise_x"] = s.noise_x;
    synth["noise_y"] = s.noise_y;
    synth["speaker_offset"] = s.speaker_offset;
    synth["seed"] = s.seed;
    j["synth"] = synth;
  } else {
    j["corpus"] = config.corpus;
  }
  j["window"] = config.window;
  j["normalize"] = config.normalize;

  json arch;
  arch["z_dim"] = config.arch.z_dim;
  arch["hx_dim"] = config.arch.hx_dim;
  arch["hy_dim"] = config.arch.hy_dim;
  arch["shared_hidden"] = config.arch.shared_hidden;
  arch["private_hidden"] = config.arch.private_hidden;
  arch["decoder_hidden"] = config.arch.decoder_hidden;
  arch["sigma_x"] = config.arch.sigma_x;
  arch["sigma_y"] = config.arch.sigma_y;
  arch["activation"] =
      config.arch.activation == nn::Activation::relu ? "relu" : "linear";
  j["arch"] = arch;

  json train;
  train["learning_rate"] = config.train.learning_rate;
  train["minibatch"] = config.train.minibatch;
  train["epochs"] = config.train.epochs;
  train["mc_samples"] = config.train.mc_samples;
  train["beta"] = config.train.beta;
  train["dropout_rate"] = config.train.dropout_rate;
  train["seed"] = config.train.seed;
  j["train"] = train;

  json prior;
  prior["checkpoint"] = config.prior_checkpoint;
  prior["warm_start"] = config.prior_warm_start;
  j["prior"] = prior;
  j["init_checkpoint"] = config.init_checkpoint;

  json gan;
  gan["lambda1"] = config.lambda1;
  gan["lambda2"] = config.lambda2;
  gan["disc_hidden"] = config.disc_hidden;
  gan["disc_dropout"] = config.disc_dropout;
  gan["disc_minibatch"] = config.disc_minibatch;
  gan["disc_update_period"] = config.disc_update_period;
  j["gan"] = gan;

  json contrastive;
  contrastive["feature_dim"] = config.feature_dim;
  contrastive["hidden"] = config.contrastive_hidden;
  contrastive["margin"] = config.margin;
  j["contrastive"] = contrastive;

  json cca;
  cca["reg"] = config.cca_reg;
  j["cca"] = cca;

  json probe;
  probe["l2_grid"] = config.probe.l2_grid;
  probe["epochs"] = config.probe.epochs;
  probe["seed"] = config.probe.seed;
  probe["folds"] = config.folds;
  probe["tandem"] = config.tandem;
  j["probe"] = probe;

  j["output"] = config.output;
  return j.dump(2) + "\n";
}

}  // namespace mvlatent::io
