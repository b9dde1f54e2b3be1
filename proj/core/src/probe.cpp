#include "mvlatent/probe.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "mvlatent/errors.hpp"
#include "mvlatent/rng.hpp"

namespace mvlatent::eval {

namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<const EMatrix>;

EMap map_matrix(const Tensor& t) {
  return EMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

/// Mean cross-entropy of the labels under softmax(X*W + b) plus the weight
/// penalty; optionally fills the gradient (same objective both paths).
double objective_and_grad(const EMap& X, const std::vector<int>& labels,
                          const EMatrix& W, const Eigen::VectorXd& b, double l2,
                          EMatrix* grad_w, Eigen::VectorXd* grad_b) {
  const Eigen::Index n = X.rows();
  const Eigen::Index C = W.cols();
  EMatrix logits = X * W;
  logits.rowwise() += b.transpose();
  Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  EMatrix shifted = logits.colwise() - row_max;
  EMatrix expd = shifted.array().exp().matrix();
  Eigen::VectorXd denom = expd.rowwise().sum();

  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    nll += std::log(denom(i)) - shifted(i, labels[static_cast<std::size_t>(i)]);
  }
  nll /= static_cast<double>(n);
  const double penalty = 0.5 * l2 * W.squaredNorm();

  if (grad_w != nullptr) {
    EMatrix probs = expd.array().colwise() / denom.array();
    for (Eigen::Index i = 0; i < n; ++i) {
      probs(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
    *grad_w = (X.transpose() * probs) / static_cast<double>(n) + l2 * W;
    *grad_b = probs.colwise().sum() / static_cast<double>(n);
  }
  (void)C;
  return nll + penalty;
}

void check_labels_in_range(const std::vector<int>& labels, std::size_t C,
                           const char* where) {
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= C) {
      throw InvalidArgument(std::string(where) + ": label " + std::to_string(label) +
                            " outside the model's " + std::to_string(C) + " classes");
    }
  }
}

void check_probe_dims(const ProbeModel& model, const Tensor& features,
                      std::size_t n_labels, const char* where) {
  if (model.weight.rank() != 2 || model.bias.rank() != 1 ||
      model.bias.numel() != model.weight.cols()) {
    throw DimensionError(std::string(where) + ": malformed probe model");
  }
  if (features.rank() != 2) {
    throw DimensionError(std::string(where) + ": features must be rank-2");
  }
  if (features.cols() != model.weight.rows()) {
    throw DimensionError(std::string(where) + ": feature width " +
                         std::to_string(features.cols()) +
                         " does not match the probe's " +
                         std::to_string(model.weight.rows()));
  }
  if (n_labels != features.rows()) {
    throw DimensionError(std::string(where) + ": " + std::to_string(n_labels) +
                         " labels for " + std::to_string(features.rows()) + " rows");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  Tensor out = Tensor::zeros({rows.size(), t.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) out.at(i, j) = t.at(rows[i], j);
  }
  return out;
}

constexpr char kReportHeader[] = "method,W,fold,dev_err,test_err";

}  // namespace

ProbeModel train_probe(const Tensor& features, const std::vector<int>& labels,
                       double l2, std::size_t epochs, std::uint64_t seed,
                       std::vector<double>* objective_trace) {
  if (features.rank() != 2 || features.rows() == 0) {
    throw DimensionError("train_probe: features must be a nonempty rank-2 matrix");
  }
  if (labels.size() != features.rows()) {
    throw DimensionError("train_probe: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(features.rows()) + " rows");
  }
  if (!(l2 >= 0.0) || !std::isfinite(l2)) {
    throw ConfigError("train_probe: l2 must be finite and nonnegative");
  }
  features.require_finite("train_probe features");

  int max_label = 0;
  std::unordered_set<int> distinct;
  for (int label : labels) {
    if (label < 0) {
      throw InvalidArgument("train_probe: negative label " + std::to_string(label));
    }
    max_label = std::max(max_label, label);
    distinct.insert(label);
  }
  if (distinct.size() < 2) {
    throw InvalidArgument("train_probe: labels contain a single class");
  }
  const std::size_t k = features.cols();
  const std::size_t C = static_cast<std::size_t>(max_label) + 1;

  // Small random start; the objective is convex, so the seed only perturbs
  // the path, not the value reached.
  Tensor w_init = Tensor::zeros({k, C});
  nn::Rng rng(seed);
  rng.fill_normal(w_init.data.data(), w_init.numel());
  for (double& v : w_init.data) v *= 0.01;

  EMap X = map_matrix(features);
  EMatrix W = map_matrix(w_init);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(C));

  double obj = objective_and_grad(X, labels, W, b, l2, nullptr, nullptr);
  if (objective_trace != nullptr) objective_trace->push_back(obj);

  double step = 1.0;
  EMatrix grad_w;
  Eigen::VectorXd grad_b;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    objective_and_grad(X, labels, W, b, l2, &grad_w, &grad_b);
    const double grad_norm2 = grad_w.squaredNorm() + grad_b.squaredNorm();
    if (grad_norm2 < 1e-24) break;

    bool accepted = false;
    for (int trial = 0; trial < 60; ++trial) {
      EMatrix w_next = W - step * grad_w;
      Eigen::VectorXd b_next = b - step * grad_b;
      const double next =
          objective_and_grad(X, labels, w_next, b_next, l2, nullptr, nullptr);
      if (next < obj) {
        W = std::move(w_next);
        b = std::move(b_next);
        obj = next;
        step = std::min(step * 2.0, 1e6);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent step left at any tried size: converged
    if (objective_trace != nullptr) objective_trace->push_back(obj);
  }

  ProbeModel model;
  model.weight = Tensor::zeros({k, C});
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      model.weight.at(i, j) = W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  model.bias = Tensor::zeros({C});
  for (std::size_t j = 0; j < C; ++j) model.bias[j] = b(static_cast<Eigen::Index>(j));
  return model;
}

double probe_objective(const ProbeModel& model, const Tensor& features,
                       const std::vector<int>& labels, double l2) {
  check_probe_dims(model, features, labels.size(), "probe_objective");
  check_labels_in_range(labels, model.class_count(), "probe_objective");
  EMap X = map_matrix(features);
  EMatrix W = map_matrix(model.weight);
  Eigen::VectorXd b(static_cast<Eigen::Index>(model.bias.numel()));
  for (std::size_t j = 0; j < model.bias.numel(); ++j) {
    b(static_cast<Eigen::Index>(j)) = model.bias[j];
  }
  return objective_and_grad(X, labels, W, b, l2, nullptr, nullptr);
}

std::vector<int> predict(const ProbeModel& model, const Tensor& features) {
  check_probe_dims(model, features, features.rows(), "predict");
  EMap X = map_matrix(features);
  EMatrix W = map_matrix(model.weight);
  EMatrix logits = X * W;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      logits(i, j) += model.bias[static_cast<std::size_t>(j)];
    }
  }
  std::vector<int> out(static_cast<std::size_t>(logits.rows()), 0);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double frame_error_rate(const ProbeModel& model, const Tensor& features,
                        const std::vector<int>& labels) {
  check_probe_dims(model, features, labels.size(), "frame_error_rate");
  if (features.rows() == 0) {
    throw InvalidArgument("frame_error_rate: no rows to score");
  }
  for (int label : labels) {
    if (label < 0) {
      throw InvalidArgument("frame_error_rate: negative label " +
                            std::to_string(label));
    }
  }
  std::vector<int> predicted = predict(model, features);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] != labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

void validate(const ProbeConfig& config) {
  if (config.l2_grid.empty()) {
    throw ConfigError("probe config: l2_grid must not be empty");
  }
  for (double l2 : config.l2_grid) {
    if (!(l2 >= 0.0) || !std::isfinite(l2)) {
      throw ConfigError("probe config: l2 values must be finite and nonnegative");
    }
  }
  if (config.epochs == 0) throw ConfigError("probe config: epochs must be >= 1");
  if (config.threads == 0) throw ConfigError("probe config: threads must be >= 1");
}

EvalReport run_protocol(const data::WindowedView& view, const data::FoldPlan& plan,
                        const FeatureExtractor& extract, const ProbeConfig& config,
                        std::string method, std::size_t window) {
  validate(config);
  if (!extract) throw InvalidArgument("run_protocol: missing feature extractor");
  if (view.features.rank() != 2) {
    throw DimensionError("run_protocol: windowed features must be rank-2");
  }
  const std::size_t n = view.features.rows();
  if (view.labels.size() != n) {
    throw InvalidArgument("run_protocol: the view has " +
                          std::to_string(view.labels.size()) + " labels for " +
                          std::to_string(n) + " frames");
  }
  if (view.speaker.size() != n) {
    throw InvalidArgument("run_protocol: per-frame speaker indices missing");
  }
  if (plan.folds.empty()) throw InvalidArgument("run_protocol: empty fold plan");

  Tensor transformed = extract(view.features);
  if (transformed.rank() != 2 || transformed.rows() != n) {
    throw DimensionError("run_protocol: the extractor must keep one row per frame");
  }
  transformed.require_finite("run_protocol features");

  std::unordered_map<std::string, std::size_t> speaker_index;
  for (std::size_t s = 0; s < view.speaker_ids.size(); ++s) {
    speaker_index.emplace(view.speaker_ids[s], s);
  }

  // Frame rows per speaker, filled once.
  std::vector<std::vector<std::size_t>> rows_of(view.speaker_ids.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (view.speaker[i] >= rows_of.size()) {
      throw InvalidArgument("run_protocol: frame speaker index out of range");
    }
    rows_of[view.speaker[i]].push_back(i);
  }

  auto rows_for = [&](const std::vector<std::string>& speakers, std::size_t fold,
                      const char* part) {
    std::vector<std::size_t> rows;
    for (const std::string& id : speakers) {
      auto it = speaker_index.find(id);
      if (it == speaker_index.end()) continue;  // speaker absent from this view
      rows.insert(rows.end(), rows_of[it->second].begin(), rows_of[it->second].end());
    }
    if (rows.empty()) {
      throw InvalidArgument("run_protocol: fold " + std::to_string(fold) +
                            " has an empty " + part + " set");
    }
    return rows;
  };

  auto labels_at = [&](const std::vector<std::size_t>& rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = view.labels[rows[i]];
    return out;
  };

  EvalReport report;
  report.method = std::move(method);
  report.window = window;
  report.folds.resize(plan.folds.size());

  std::atomic<std::size_t> next_fold{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto run_fold = [&](std::size_t f) {
    const data::Fold& fold = plan.folds[f];
    std::vector<std::size_t> train_rows = rows_for(fold.train, f, "train");
    std::vector<std::size_t> dev_rows = rows_for(fold.dev, f, "dev");
    std::vector<std::size_t> test_rows = rows_for(fold.test, f, "test");

    Tensor train_x = gather_rows(transformed, train_rows);
    Tensor dev_x = gather_rows(transformed, dev_rows);
    Tensor test_x = gather_rows(transformed, test_rows);
    std::vector<int> train_labels = labels_at(train_rows);
    std::vector<int> dev_labels = labels_at(dev_rows);
    std::vector<int> test_labels = labels_at(test_rows);

    const std::uint64_t fold_seed = nn::derive_seed(config.seed, "probe", f);
    double best_dev = std::numeric_limits<double>::infinity();
    ProbeModel best_model;
    double best_l2 = config.l2_grid.front();
    for (double l2 : config.l2_grid) {
      ProbeModel candidate =
          train_probe(train_x, train_labels, l2, config.epochs, fold_seed);
      const double dev_err = frame_error_rate(candidate, dev_x, dev_labels);
      if (dev_err < best_dev) {
        best_dev = dev_err;
        best_model = std::move(candidate);
        best_l2 = l2;
      }
    }

    FoldResult& result = report.folds[f];
    result.fold = f;
    result.dev_err = best_dev;
    result.selected_l2 = best_l2;
    result.test_err = frame_error_rate(best_model, test_x, test_labels);
  };

  auto worker = [&]() {
    while (true) {
      const std::size_t f = next_fold.fetch_add(1);
      if (f >= plan.folds.size()) return;
      try {
        run_fold(f);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t workers = std::min(config.threads, plan.folds.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const FoldResult& fold : report.folds) {
    report.average_dev_err += fold.dev_err;
    report.average_test_err += fold.test_err;
  }
  report.average_dev_err /= static_cast<double>(report.folds.size());
  report.average_test_err /= static_cast<double>(report.folds.size());
  return report;
}

std::string report_csv(const EvalReport& report) {
  if (report.method.find_first_of(",\"\n\r") != std::string::npos) {
    throw InvalidArgument("report_csv: method name contains CSV delimiters");
  }
  std::string out = kReportHeader;
  out += '\n';
  for (const FoldResult& fold : report.folds) {
    out += report.method;
    out += ',';
    out += std::to_string(report.window);
    out += ',';
    out += std::to_string(fold.fold);
    out += ',';
    out += format_double(fold.dev_err);
    out += ',';
    out += format_double(fold.test_err);
    out += '\n';
  }
  return out;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << report_csv(report);
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(path.string() + ": empty report file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportHeader) {
    throw FormatError(path.string() + ": expected header \"" +
                      std::string(kReportHeader) + "\", got \"" + line + "\"");
  }

  EvalReport report;
  bool first_row = true;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream row(line);
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (fields.size() != 5) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields, got " +
                        std::to_string(fields.size()));
    }
    FoldResult fold;
    std::size_t window = 0;
    try {
      std::size_t used = 0;
      window = std::stoul(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument(fields[1]);
      fold.fold = std::stoul(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument(fields[2]);
      fold.dev_err = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument(fields[3]);
      fold.test_err = std::stod(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument(fields[4]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": non-numeric field");
    }
    if (first_row) {
      report.method = fields[0];
      report.window = window;
      first_row = false;
    } else if (fields[0] != report.method || window != report.window) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": mixed method/W rows in one report");
    }
    report.folds.push_back(fold);
  }
  if (report.folds.empty()) {
    throw FormatError(path.string() + ": report has no fold rows");
  }
  for (const FoldResult& fold : report.folds) {
    report.average_dev_err += fold.dev_err;
    report.average_test_err += fold.test_err;
  }
  report.average_dev_err /= static_cast<double>(report.folds.size());
  report.average_test_err /= static_cast<double>(report.folds.size());
  return report;
}

std::string report_markdown(const EvalReport& report) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  std::string out;
  out += "## ";
  out += report.method.empty() ? std::string("probe") : report.method;
  out += " (W=" + std::to_string(report.window) + ")\n\n";
  out += "| fold | selected l2 | dev error | test error |\n";
  out += "|-----:|------------:|----------:|-----------:|\n";
  for (const FoldResult& fold : report.folds) {
    char l2_buf[32];
    std::snprintf(l2_buf, sizeof(l2_buf), "%g", fold.selected_l2);
    out += "| " + std::to_string(fold.fold) + " | " + l2_buf + " | " +
           pct(fold.dev_err) + " | " + pct(fold.test_err) + " |\n";
  }
  out += "| average |  | " + pct(report.average_dev_err) + " | " +
         pct(report.average_test_err) + " |\n";
  return out;
}

}  // namespace mvlatent::eval
