#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvlatent/synth.hpp"

namespace mvlatent::cli {

/// Process exit codes shared by every subcommand.
inline constexpr int kExitSuccess = 0;       // command ran, checks passed
inline constexpr int kExitCheckFailure = 1;  // a verification or run check failed
inline constexpr int kExitUsage = 2;         // usage or configuration error
inline constexpr int kExitIoFormat = 3;      // I/O failure or malformed file

struct SynthArgs {
  data::SynthConfig config;
  std::filesystem::path out;
};

struct TrainArgs {
  std::filesystem::path config;
};

struct ExtractArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path corpus;
  std::filesystem::path out;
  std::string view = "x";
  bool tandem = false;  // concatenate learned features with the raw view frames
};

struct ProbeArgs {
  std::filesystem::path config;
  std::filesystem::path features;    // optional pre-extracted feature corpus
  std::filesystem::path checkpoint;  // optional override of <output>/checkpoint.ckpt
};

struct CcaArgs {
  std::filesystem::path config;
};

struct GradcheckArgs {
  std::string method = "all";  // vcca | vccap | vccap-gan | contrastive | all
  std::size_t dims = 2;        // latent width of the tiny randomized models
  std::uint64_t seed = 0;
};

struct ReportArgs {
  std::vector<std::filesystem::path> runs;  // run directories (train + probe outputs)
  std::filesystem::path out_dir = ".";
};

int cmd_synth(const SynthArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_extract(const ExtractArgs& args);
int cmd_probe(const ProbeArgs& args);
int cmd_cca(const CcaArgs& args);
int cmd_gradcheck(const GradcheckArgs& args);
int cmd_report(const ReportArgs& args);

/// Full CLI grammar:
///   mvlatent <synth|train|extract|probe|cca|gradcheck|report> [flags]
/// The MVLATENT_THREADS environment variable caps worker threads (default 1
/// for bit-exact runs). Returns one of the exit codes above.
int run_cli(int argc, const char* const* argv);

}  // namespace mvlatent::cli
