#include "mvlatent/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <string>

#include "json.hpp"
#include "mvlatent/errors.hpp"

namespace mvlatent::io {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'V', 'C', 'K'};
constexpr unsigned char kVersion = 1;

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint64_t get_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

const std::set<std::string>& known_methods() {
  static const std::set<std::string> methods = {"vcca", "vccap", "vccap-gan",
                                                "contrastive", "cca"};
  return methods;
}

json spec_to_json(const nn::MlpSpec& spec) {
  if (spec.layer_widths.empty()) return nullptr;
  json j;
  j["layer_widths"] = spec.layer_widths;
  j["activation"] = spec.activation == nn::Activation::relu ? "relu" : "linear";
  j["dropout_rate"] = spec.dropout_rate;
  j["output_heads"] =
      spec.output_heads == nn::OutputHead::single ? "single" : "mean_and_logvar";
  return j;
}

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw FormatError(std::string("checkpoint manifest: unknown key \"") +
                        it.key() + "\" in " + where);
    }
  }
}

nn::MlpSpec spec_from_json(const json& j, const char* where) {
  nn::MlpSpec spec;
  if (j.is_null()) return spec;
  if (!j.is_object()) {
    throw FormatError(std::string("checkpoint manifest: ") + where +
                      " must be an object or null");
  }
  require_keys(j, {"layer_widths", "activation", "dropout_rate", "output_heads"},
               where);
  try {
    spec.layer_widths = j.at("layer_widths").get<std::vector<int>>();
    const std::string act = j.at("activation").get<std::string>();
    if (act == "relu") {
      spec.activation = nn::Activation::relu;
    } else if (act == "linear") {
      spec.activation = nn::Activation::linear;
    } else {
      throw FormatError("checkpoint manifest: unknown activation \"" + act + "\"");
    }
    spec.dropout_rate = j.at("dropout_rate").get<double>();
    const std::string heads = j.at("output_heads").get<std::string>();
    if (heads == "single") {
      spec.output_heads = nn::OutputHead::single;
    } else if (heads == "mean_and_logvar") {
      spec.output_heads = nn::OutputHead::mean_and_logvar;
    } else {
      throw FormatError("checkpoint manifest: unknown output head \"" + heads + "\"");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: malformed spec for ") +
                      where + ": " + e.what());
  }
  return spec;
}

json train_to_json(const model::TrainConfig& config) {
  json j;
  j["learning_rate"] = config.learning_rate;
  j["minibatch"] = config.minibatch;
  j["epochs"] = config.epochs;
  j["mc_samples"] = config.mc_samples;
  j["beta"] = config.beta;
  j["dropout_rate"] = config.dropout_rate;
  j["seed"] = config.seed;
  return j;
}

model::TrainConfig train_from_json(const json& j) {
  require_keys(j, {"learning_rate", "minibatch", "epochs", "mc_samples", "beta",
                   "dropout_rate", "seed"},
               "train");
  model::TrainConfig config;
  try {
    config.learning_rate = j.at("learning_rate").get<double>();
    config.minibatch = j.at("minibatch").get<std::size_t>();
    config.epochs = j.at("epochs").get<std::size_t>();
    config.mc_samples = j.at("mc_samples").get<std::size_t>();
    config.beta = j.at("beta").get<double>();
    config.dropout_rate = j.at("dropout_rate").get<double>();
    config.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: malformed train block: ") +
                      e.what());
  }
  return config;
}

/// Validates that a spec/param pair is internally consistent (shapes follow
/// the spec's layout).
void check_mlp(const nn::MlpSpec& spec, const nn::ParamSet& params, const char* name) {
  nn::validate(spec);
  auto layout = nn::param_layout(spec);
  if (layout.size() != params.size()) {
    throw ConfigError(std::string("checkpoint: ") + name + " has " +
                      std::to_string(params.size()) + " tensors, spec implies " +
                      std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& named = params.items()[i];
    if (named.name != layout[i].first || named.value.shape != layout[i].second) {
      throw ConfigError(std::string("checkpoint: ") + name +
                        " parameters do not match the spec layout at \"" +
                        layout[i].first + "\"");
    }
  }
}

void append_layout(std::vector<std::pair<std::string, std::vector<std::size_t>>>& out,
                   const std::string& prefix, const nn::ParamSet& params) {
  for (const auto& named : params.items()) {
    out.emplace_back(prefix + "." + named.name, named.value.shape);
  }
}

std::vector<const Tensor*> checkpoint_tensors(const Checkpoint& checkpoint) {
  std::vector<const Tensor*> out;
  if (vcca_family(checkpoint.method)) {
    return model::param_tensors(checkpoint.model);
  }
  if (checkpoint.method == "contrastive") {
    return model::param_tensors(checkpoint.contrastive);
  }
  for (const auto& named : checkpoint.cca_x.params.items()) out.push_back(&named.value);
  for (const auto& named : checkpoint.cca_y.params.items()) out.push_back(&named.value);
  return out;
}

void check_window_width(const Checkpoint& checkpoint, std::size_t expected,
                        const Tensor& windows) {
  if (windows.rank() != 2) {
    throw DimensionError("checkpoint_features: windows must be rank-2");
  }
  if (windows.cols() != expected) {
    throw DimensionError(
        "checkpoint_features: the checkpoint (W=" + std::to_string(checkpoint.window) +
        ") expects window width " + std::to_string(expected) +
        ", these windows have width " + std::to_string(windows.cols()));
  }
}

}  // namespace

bool vcca_family(const std::string& method) {
  return method == "vcca" || method == "vccap" || method == "vccap-gan";
}

void validate(const Checkpoint& checkpoint) {
  if (known_methods().find(checkpoint.method) == known_methods().end()) {
    throw ConfigError("checkpoint: unknown method \"" + checkpoint.method + "\"");
  }
  if (checkpoint.window == 0 || checkpoint.window % 2 == 0) {
    throw ConfigError("checkpoint: window must be odd, got " +
                      std::to_string(checkpoint.window));
  }
  if (vcca_family(checkpoint.method)) {
    model::validate_model(checkpoint.model);
    if (checkpoint.method == "vcca" &&
        (checkpoint.model.hx_dim != 0 || checkpoint.model.hy_dim != 0)) {
      throw ConfigError("checkpoint: method vcca cannot carry private channels");
    }
  } else if (checkpoint.method == "contrastive") {
    model::validate_model(checkpoint.contrastive);
  } else {  // cca
    check_mlp(checkpoint.cca_x.spec, checkpoint.cca_x.params, "cca proj_x");
    check_mlp(checkpoint.cca_y.spec, checkpoint.cca_y.params, "cca proj_y");
    if (checkpoint.cca_x.spec.output_width() != checkpoint.cca_y.spec.output_width()) {
      throw ConfigError("checkpoint: cca projections disagree on k");
    }
  }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> checkpoint_layout(
    const Checkpoint& checkpoint) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  if (vcca_family(checkpoint.method)) {
    std::vector<std::string> names = model::param_names(checkpoint.model);
    std::vector<const Tensor*> tensors = model::param_tensors(checkpoint.model);
    for (std::size_t i = 0; i < names.size(); ++i) {
      out.emplace_back(names[i], tensors[i]->shape);
    }
  } else if (checkpoint.method == "contrastive") {
    std::vector<std::string> names = model::param_names(checkpoint.contrastive);
    std::vector<const Tensor*> tensors = model::param_tensors(checkpoint.contrastive);
    for (std::size_t i = 0; i < names.size(); ++i) {
      out.emplace_back(names[i], tensors[i]->shape);
    }
  } else {
    append_layout(out, "proj_x", checkpoint.cca_x.params);
    append_layout(out, "proj_y", checkpoint.cca_y.params);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  validate(checkpoint);

  json manifest;
  manifest["method"] = checkpoint.method;
  manifest["window"] = checkpoint.window;
  manifest["normalize"] = checkpoint.normalize;
  manifest["tool_version"] = checkpoint.tool_version;
  manifest["corpus_fingerprint"] = checkpoint.corpus_fingerprint;
  manifest["train"] = train_to_json(checkpoint.train);

  json dims;
  json specs;
  if (vcca_family(checkpoint.method)) {
    const model::VccapModel& m = checkpoint.model;
    dims["input_x"] = m.encoder_z_spec.input_width();
    dims["input_y"] = m.decoder_y_spec.output_width();  // decoder emits the y mean
    dims["z_dim"] = m.z_dim;
    dims["hx_dim"] = m.hx_dim;
    dims["hy_dim"] = m.hy_dim;
    dims["sigma_x"] = m.sigma_x;
    dims["sigma_y"] = m.sigma_y;
    specs["encoder_z"] = spec_to_json(m.encoder_z_spec);
    specs["encoder_hx"] = spec_to_json(m.encoder_hx_spec);
    specs["encoder_hy"] = spec_to_json(m.encoder_hy_spec);
    specs["decoder_x"] = spec_to_json(m.decoder_x_spec);
    specs["decoder_y"] = spec_to_json(m.decoder_y_spec);
  } else if (checkpoint.method == "contrastive") {
    const model::ContrastiveModel& m = checkpoint.contrastive;
    dims["input_x"] = m.proj_x_spec.input_width();
    dims["input_y"] = m.proj_y_spec.input_width();
    dims["feature_dim"] = m.feature_dim;
    dims["margin"] = m.margin;
    specs["proj_x"] = spec_to_json(m.proj_x_spec);
    specs["proj_y"] = spec_to_json(m.proj_y_spec);
  } else {
    dims["input_x"] = checkpoint.cca_x.spec.input_width();
    dims["input_y"] = checkpoint.cca_y.spec.input_width();
    dims["k"] = checkpoint.cca_x.spec.output_width();
    specs["proj_x"] = spec_to_json(checkpoint.cca_x.spec);
    specs["proj_y"] = spec_to_json(checkpoint.cca_y.spec);
  }
  manifest["dims"] = dims;
  manifest["specs"] = specs;

  json params = json::array();
  for (const auto& [name, shape] : checkpoint_layout(checkpoint)) {
    json entry;
    entry["name"] = name;
    entry["shape"] = shape;
    params.push_back(entry);
  }
  manifest["params"] = params;

  const std::string manifest_text = manifest.dump();

  std::string blob;
  for (const Tensor* tensor : checkpoint_tensors(checkpoint)) {
    for (double v : tensor->data) {
      put_u64le(blob, std::bit_cast<std::uint64_t>(v));
    }
  }

  std::string file;
  file.append(kMagic, sizeof(kMagic));
  file += static_cast<char>(kVersion);
  put_u64le(file, manifest_text.size());
  file += manifest_text;
  put_u64le(file, blob.size());
  file += blob;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(file.data(), static_cast<std::streamsize>(file.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());

  const auto* bytes = reinterpret_cast<const unsigned char*>(file.data());
  if (file.size() < sizeof(kMagic) + 1 + 8 ||
      std::memcmp(file.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + ": not a checkpoint file");
  }
  if (bytes[4] != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(static_cast<int>(bytes[4])));
  }
  std::size_t offset = sizeof(kMagic) + 1;
  const std::uint64_t manifest_len = get_u64le(bytes + offset);
  offset += 8;
  if (offset + manifest_len + 8 > file.size()) {
    throw FormatError(path.string() + ": truncated manifest");
  }
  json manifest;
  try {
    manifest = json::parse(file.substr(offset, manifest_len));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": manifest is not valid JSON: " + e.what());
  }
  offset += manifest_len;
  const std::uint64_t blob_len = get_u64le(bytes + offset);
  offset += 8;
  if (offset + blob_len != file.size()) {
    throw FormatError(path.string() + ": blob length field disagrees with file size");
  }

  require_keys(manifest,
               {"method", "window", "normalize", "tool_version", "corpus_fingerprint",
                "train", "dims", "specs", "params"},
               "the top level");

  Checkpoint checkpoint;
  try {
    checkpoint.method = manifest.at("method").get<std::string>();
    checkpoint.window = manifest.at("window").get<std::size_t>();
    checkpoint.normalize = manifest.at("normalize").get<bool>();
    checkpoint.tool_version = manifest.at("tool_version").get<std::string>();
    checkpoint.corpus_fingerprint = manifest.at("corpus_fingerprint").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed manifest: " + e.what());
  }
  checkpoint.train = train_from_json(manifest.at("train"));
  if (known_methods().find(checkpoint.method) == known_methods().end()) {
    throw FormatError(path.string() + ": unknown method \"" + checkpoint.method + "\"");
  }

  const json& dims = manifest.at("dims");
  const json& specs = manifest.at("specs");
  try {
    if (vcca_family(checkpoint.method)) {
      require_keys(dims, {"input_x", "input_y", "z_dim", "hx_dim", "hy_dim",
                          "sigma_x", "sigma_y"},
                   "dims");
      require_keys(specs, {"encoder_z", "encoder_hx", "encoder_hy", "decoder_x",
                           "decoder_y"},
                   "specs");
      model::VccapModel& m = checkpoint.model;
      m.z_dim = dims.at("z_dim").get<std::size_t>();
      m.hx_dim = dims.at("hx_dim").get<std::size_t>();
      m.hy_dim = dims.at("hy_dim").get<std::size_t>();
      m.sigma_x = dims.at("sigma_x").get<double>();
      m.sigma_y = dims.at("sigma_y").get<double>();
      m.encoder_z_spec = spec_from_json(specs.at("encoder_z"), "encoder_z");
      m.encoder_hx_spec = spec_from_json(specs.at("encoder_hx"), "encoder_hx");
      m.encoder_hy_spec = spec_from_json(specs.at("encoder_hy"), "encoder_hy");
      m.decoder_x_spec = spec_from_json(specs.at("decoder_x"), "decoder_x");
      m.decoder_y_spec = spec_from_json(specs.at("decoder_y"), "decoder_y");
    } else if (checkpoint.method == "contrastive") {
      require_keys(dims, {"input_x", "input_y", "feature_dim", "margin"}, "dims");
      require_keys(specs, {"proj_x", "proj_y"}, "specs");
      model::ContrastiveModel& m = checkpoint.contrastive;
      m.feature_dim = dims.at("feature_dim").get<std::size_t>();
      m.margin = dims.at("margin").get<double>();
      m.proj_x_spec = spec_from_json(specs.at("proj_x"), "proj_x");
      m.proj_y_spec = spec_from_json(specs.at("proj_y"), "proj_y");
    } else {
      require_keys(dims, {"input_x", "input_y", "k"}, "dims");
      require_keys(specs, {"proj_x", "proj_y"}, "specs");
      checkpoint.cca_x.spec = spec_from_json(specs.at("proj_x"), "proj_x");
      checkpoint.cca_y.spec = spec_from_json(specs.at("proj_y"), "proj_y");
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed manifest: " + e.what());
  }

  // Expected parameter layout from the specs, independent of the stored
  // table; the stored table must agree entry for entry.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> expected;
  auto add_net = [&expected](const char* prefix, const nn::MlpSpec& spec) {
    if (spec.layer_widths.empty()) return;
    nn::validate(spec);
    for (const auto& [name, shape] : nn::param_layout(spec)) {
      expected.emplace_back(std::string(prefix) + "." + name, shape);
    }
  };
  if (vcca_family(checkpoint.method)) {
    add_net("encoder_z", checkpoint.model.encoder_z_spec);
    add_net("encoder_hx", checkpoint.model.encoder_hx_spec);
    add_net("encoder_hy", checkpoint.model.encoder_hy_spec);
    add_net("decoder_x", checkpoint.model.decoder_x_spec);
    add_net("decoder_y", checkpoint.model.decoder_y_spec);
  } else if (checkpoint.method == "contrastive") {
    add_net("proj_x", checkpoint.contrastive.proj_x_spec);
    add_net("proj_y", checkpoint.contrastive.proj_y_spec);
  } else {
    add_net("proj_x", checkpoint.cca_x.spec);
    add_net("proj_y", checkpoint.cca_y.spec);
  }

  const json& params = manifest.at("params");
  if (!params.is_array() || params.size() != expected.size()) {
    throw FormatError(path.string() + ": parameter table lists " +
                      std::to_string(params.size()) + " tensors, specs imply " +
                      std::to_string(expected.size()));
  }
  std::uint64_t expected_bytes = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const json& entry = params.at(i);
    require_keys(entry, {"name", "shape"}, "a parameter entry");
    std::string name;
    std::vector<std::size_t> shape;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": malformed parameter entry: " + e.what());
    }
    if (name != expected[i].first || shape != expected[i].second) {
      throw FormatError(path.string() + ": parameter table entry \"" + name +
                        "\" does not match the spec layout (\"" + expected[i].first +
                        "\" " + nn::shape_string(expected[i].second) + ")");
    }
    std::uint64_t numel = 1;
    for (std::size_t d : shape) numel *= d;
    expected_bytes += numel * 8;
  }

  // The hard gate: blob length must match the manifest before any value is
  // decoded.
  if (blob_len != expected_bytes) {
    throw FormatError(path.string() + ": manifest declares " +
                      std::to_string(expected_bytes) + " parameter bytes, blob holds " +
                      std::to_string(blob_len));
  }

  const unsigned char* blob = bytes + offset;
  std::size_t cursor = 0;
  auto read_net = [&](const nn::MlpSpec& spec, nn::ParamSet& out) {
    if (spec.layer_widths.empty()) return;
    for (const auto& [name, shape] : nn::param_layout(spec)) {
      Tensor t = Tensor::zeros(shape);
      for (double& v : t.data) {
        v = std::bit_cast<double>(get_u64le(blob + cursor));
        cursor += 8;
      }
      out.add(name, std::move(t));
    }
  };
  if (vcca_family(checkpoint.method)) {
    read_net(checkpoint.model.encoder_z_spec, checkpoint.model.encoder_z);
    read_net(checkpoint.model.encoder_hx_spec, checkpoint.model.encoder_hx);
    read_net(checkpoint.model.encoder_hy_spec, checkpoint.model.encoder_hy);
    read_net(checkpoint.model.decoder_x_spec, checkpoint.model.decoder_x);
    read_net(checkpoint.model.decoder_y_spec, checkpoint.model.decoder_y);
  } else if (checkpoint.method == "contrastive") {
    read_net(checkpoint.contrastive.proj_x_spec, checkpoint.contrastive.proj_x);
    read_net(checkpoint.contrastive.proj_y_spec, checkpoint.contrastive.proj_y);
  } else {
    read_net(checkpoint.cca_x.spec, checkpoint.cca_x.params);
    read_net(checkpoint.cca_y.spec, checkpoint.cca_y.params);
  }

  validate(checkpoint);
  return checkpoint;
}

Tensor checkpoint_features(const Checkpoint& checkpoint, const Tensor& windows,
                           data::View view) {
  if (vcca_family(checkpoint.method)) {
    if (view != data::View::x) {
      throw ConfigError("checkpoint_features: " + checkpoint.method +
                        " embeds view x only (its features are the posterior mean "
                        "of q(z|x))");
    }
    check_window_width(checkpoint,
                       static_cast<std::size_t>(checkpoint.model.encoder_z_spec.input_width()),
                       windows);
    return model::encode_features(checkpoint.model, windows);
  }
  if (checkpoint.method == "contrastive") {
    const model::ContrastiveModel& m = checkpoint.contrastive;
    if (view == data::View::x) {
      check_window_width(checkpoint,
                         static_cast<std::size_t>(m.proj_x_spec.input_width()), windows);
      return model::contrastive_features(m, windows);
    }
    check_window_width(checkpoint,
                       static_cast<std::size_t>(m.proj_y_spec.input_width()), windows);
    return nn::forward_mlp(m.proj_y_spec, m.proj_y, windows).first;
  }
  const nn::Mlp& projection = view == data::View::x ? checkpoint.cca_x : checkpoint.cca_y;
  check_window_width(checkpoint,
                     static_cast<std::size_t>(projection.spec.input_width()), windows);
  return nn::forward_mlp(projection.spec, projection.params, windows).first;
}

}  // namespace mvlatent::io
