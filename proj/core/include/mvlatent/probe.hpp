#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mvlatent/pipeline.hpp"
#include "mvlatent/tensor.hpp"

namespace mvlatent::eval {

using nn::Tensor;

/// Multinomial logistic frame classifier used to score feature quality.
/// Logits for a frame row x are x * weight + bias.
struct ProbeModel {
  Tensor weight;  // [k, C]
  Tensor bias;    // [C]

  std::size_t feature_dim() const { return weight.rank() == 2 ? weight.rows() : 0; }
  std::size_t class_count() const { return weight.rank() == 2 ? weight.cols() : 0; }
};

/// Fits the probe by full-batch gradient descent on the mean cross-entropy
/// plus (l2/2)*||weight||^2 (bias unregularized). Steps follow a
/// deterministic backtracking schedule: a proposed step is accepted only if
/// it lowers the objective, otherwise the step size halves and the proposal
/// is retried, so the objective decreases strictly monotonically across
/// accepted steps. The seed only randomizes the small initialization; the
/// objective is convex, so runs from different seeds converge to the same
/// objective value. Classes are 0..max(labels); at least two distinct labels
/// are required (InvalidArgument otherwise). When objective_trace is given it
/// receives the initial objective followed by the objective after every
/// accepted step.
ProbeModel train_probe(const Tensor& features, const std::vector<int>& labels,
                       double l2, std::size_t epochs, std::uint64_t seed,
                       std::vector<double>* objective_trace = nullptr);

/// The trained objective: mean cross-entropy + (l2/2)*||weight||^2. Labels
/// must lie in [0, C).
double probe_objective(const ProbeModel& model, const Tensor& features,
                       const std::vector<int>& labels, double l2);

/// Argmax class per row; ties broken by the lowest class index.
std::vector<int> predict(const ProbeModel& model, const Tensor& features);

/// Fraction of rows whose predicted class differs from the label, in [0, 1].
/// Labels >= C can never be predicted and always count as errors; negative
/// labels are rejected.
double frame_error_rate(const ProbeModel& model, const Tensor& features,
                        const std::vector<int>& labels);

/// Protocol settings: the l2 grid searched per fold (selection on dev error
/// only), the gradient-descent epoch budget, the master seed (per-fold seeds
/// are derived from it), and the number of worker threads across folds.
struct ProbeConfig {
  std::vector<double> l2_grid = {0.0, 1e-3, 1e-1};
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Throws ConfigError on an empty/negative grid, zero epochs, or zero threads.
void validate(const ProbeConfig& config);

/// Maps the windowed input rows [N, d*W] to the feature rows [N, k] fed to
/// the probe. Must be row-independent and deterministic.
using FeatureExtractor = std::function<Tensor(const Tensor& windows)>;

struct FoldResult {
  std::size_t fold = 0;
  double dev_err = 0.0;   // dev error of the selected hyperparameter
  double test_err = 0.0;  // test error of the dev-selected probe
  double selected_l2 = 0.0;
};

struct EvalReport {
  std::string method;
  std::size_t window = 0;  // W
  std::vector<FoldResult> folds;
  double average_dev_err = 0.0;
  double average_test_err = 0.0;
};

/// Per fold: extract features once, train one probe per l2 value on the
/// train speakers, pick the l2 with the lowest dev error (ties keep the
/// earlier grid entry), and score that probe on the test speakers. Test
/// labels are never consulted during selection. The averages are plain means
/// over folds. Throws InvalidArgument when a fold has an empty train, dev,
/// or test set or the view lacks labels.
EvalReport run_protocol(const data::WindowedView& view, const data::FoldPlan& plan,
                        const FeatureExtractor& extract, const ProbeConfig& config,
                        std::string method = {}, std::size_t window = 0);

/// CSV with the exact header method,W,fold,dev_err,test_err and one row per
/// fold (errors in %.17g). The method name must not contain commas, quotes,
/// or newlines.
std::string report_csv(const EvalReport& report);
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

/// Parses report_csv output; the averages are recomputed from the rows.
/// Throws FormatError on a malformed file and IoError when unreadable.
EvalReport read_report_csv(const std::filesystem::path& path);

/// Markdown summary: one table row per fold plus the 6-fold average.
std::string report_markdown(const EvalReport& report);

}  // namespace mvlatent::eval
