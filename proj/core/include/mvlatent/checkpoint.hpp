#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mvlatent/contrastive.hpp"
#include "mvlatent/pipeline.hpp"
#include "mvlatent/train.hpp"
#include "mvlatent/vcca.hpp"

namespace mvlatent::io {

using nn::Tensor;

inline constexpr char kToolVersion[] = "mvlatent-0.1.0";

/// True for the shared-latent generative methods persisted as a VccapModel.
bool vcca_family(const std::string& method);

/// A persisted training artifact: exactly one model family is populated,
/// keyed by method.
///   vcca | vccap | vccap-gan  -> model (hx_dim == hy_dim == 0 for vcca)
///   contrastive               -> contrastive
///   cca                       -> cca_x / cca_y (affine canonical projections)
struct Checkpoint {
  std::string method = "vccap";
  std::size_t window = 1;    // W the training windows were built with
  bool normalize = true;     // whether training normalized per speaker
  model::VccapModel model;
  model::ContrastiveModel contrastive;
  nn::Mlp cca_x;
  nn::Mlp cca_y;
  model::TrainConfig train;  // training-config snapshot (defaulted for cca)
  std::uint64_t corpus_fingerprint = 0;
  std::string tool_version = kToolVersion;
};

/// Throws ConfigError on an unknown method or a populated family that fails
/// its own model validation.
void validate(const Checkpoint& checkpoint);

/// Parameter names and shapes of the populated family in canonical order;
/// this order is the binary blob's layout.
std::vector<std::pair<std::string, std::vector<std::size_t>>> checkpoint_layout(
    const Checkpoint& checkpoint);

/// Container: "MVCK" magic + version byte, a length-prefixed JSON manifest
/// (method, window, dims, layer specs, parameter name/shape table, training
/// config, corpus fingerprint, tool version), then one little-endian 64-bit
/// float blob holding every parameter tensor in manifest order. Round-trips
/// bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Validates the manifest against the blob length *before* reading any
/// parameter values; a disagreement raises FormatError without touching the
/// blob. IoError when the file cannot be read.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// The checkpoint's feature map on windowed rows: posterior mean of q(z|x)
/// for the vcca family (view x only), the view's projection head for
/// contrastive, and the affine canonical projection for cca. Throws
/// DimensionError when the window width does not match the stored model,
/// naming both widths; ConfigError for a view the method cannot embed.
Tensor checkpoint_features(const Checkpoint& checkpoint, const Tensor& windows,
                           data::View view = data::View::x);

}  // namespace mvlatent::io
