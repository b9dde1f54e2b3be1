#include "mvlatent/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mvlatent/errors.hpp"
#include "mvlatent/rng.hpp"
#include "mvlatent/tensor_ops.hpp"

namespace mvlatent::data {

using nn::shape_string;

namespace {

const Tensor& view_of(const FrameSequence& seq, View view) {
  return view == View::x ? seq.frames_x : seq.frames_y;
}

}  // namespace

Tensor window_frames(const FrameSequence& seq, View view, std::size_t W) {
  if (W == 0 || W % 2 == 0) {
    throw InvalidArgument("window_frames: W must be odd, got " + std::to_string(W));
  }
  const Tensor& frames = view_of(seq, view);
  if (frames.rank() != 2) throw DimensionError("window_frames: view has no frames");
  const std::size_t T = frames.rows(), d = frames.cols();
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(W / 2);

  Tensor out = Tensor::zeros({T, d * W});
  for (std::size_t t = 0; t < T; ++t) {
    double* row = out.data.data() + t * d * W;
    for (std::ptrdiff_t o = -half; o <= half; ++o) {
      std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + o;
      src = std::clamp<std::ptrdiff_t>(src, 0, static_cast<std::ptrdiff_t>(T) - 1);
      const double* frame = frames.data.data() + static_cast<std::size_t>(src) * d;
      double* dst = row + static_cast<std::size_t>(o + half) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] = frame[j];
    }
  }
  return out;
}

WindowedView window_corpus(const MultiViewCorpus& corpus, View view, std::size_t W) {
  validate(corpus);
  const std::size_t d = view == View::x ? corpus.d_x : corpus.d_y;
  if (d == 0) throw InvalidArgument("window_corpus: the requested view is empty");

  WindowedView out;
  out.speaker_ids = corpus.speaker_ids();
  std::unordered_map<std::string, std::size_t> speaker_index;
  for (std::size_t i = 0; i < out.speaker_ids.size(); ++i) {
    speaker_index.emplace(out.speaker_ids[i], i);
  }

  const std::size_t total = corpus.total_frames();
  out.features = Tensor::zeros({total, d * W});
  out.speaker.reserve(total);
  bool all_labeled = true;
  for (const auto& seq : corpus.sequences) all_labeled = all_labeled && seq.has_labels();

  std::size_t row = 0;
  for (const auto& seq : corpus.sequences) {
    Tensor w = window_frames(seq, view, W);
    std::copy(w.data.begin(), w.data.end(), out.features.data.begin() + row * d * W);
    const std::size_t sp = speaker_index.at(seq.speaker_id);
    for (std::size_t t = 0; t < seq.n_frames(); ++t) out.speaker.push_back(sp);
    if (all_labeled) {
      out.labels.insert(out.labels.end(), seq.labels.begin(), seq.labels.end());
    }
    row += seq.n_frames();
  }
  return out;
}

MultiViewCorpus normalize_per_speaker(const MultiViewCorpus& corpus, View view,
                                      std::vector<std::string>* warnings) {
  validate(corpus);
  const std::size_t d = view == View::x ? corpus.d_x : corpus.d_y;
  if (d == 0) throw InvalidArgument("normalize_per_speaker: the requested view is empty");

  // Pass 1: per-speaker frame counts, sums, and sums of squares.
  struct Stats {
    std::size_t n = 0;
    std::vector<double> sum, sumsq;
  };
  std::unordered_map<std::string, Stats> stats;
  for (const auto& seq : corpus.sequences) {
    Stats& s = stats[seq.speaker_id];
    if (s.sum.empty()) {
      s.sum.assign(d, 0.0);
      s.sumsq.assign(d, 0.0);
    }
    const Tensor& frames = view_of(seq, view);
    for (std::size_t t = 0; t < frames.rows(); ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        const double v = frames.at(t, j);
        s.sum[j] += v;
        s.sumsq[j] += v * v;
      }
    }
    s.n += frames.rows();
  }

  struct Moments {
    std::vector<double> mean, inv_std;
  };
  std::unordered_map<std::string, Moments> moments;
  for (auto& [speaker, s] : stats) {
    if (s.n < 2) {
      throw InvalidArgument("normalize_per_speaker: speaker " + speaker + " has " +
                            std::to_string(s.n) + " frame(s); need at least 2");
    }
    Moments m;
    m.mean.resize(d);
    m.inv_std.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      m.mean[j] = s.sum[j] / static_cast<double>(s.n);
      const double var = s.sumsq[j] / static_cast<double>(s.n) - m.mean[j] * m.mean[j];
      if (var <= 0.0) {
        m.inv_std[j] = 1.0;  // centered pass-through
        if (warnings != nullptr) {
          warnings->push_back("speaker " + speaker + " dimension " + std::to_string(j) +
                              " has zero variance; centered without scaling");
        }
      } else {
        m.inv_std[j] = 1.0 / std::sqrt(var);
      }
    }
    moments.emplace(speaker, std::move(m));
  }

  MultiViewCorpus out = corpus;
  for (auto& seq : out.sequences) {
    const Moments& m = moments.at(seq.speaker_id);
    Tensor& frames = view == View::x ? seq.frames_x : seq.frames_y;
    for (std::size_t t = 0; t < frames.rows(); ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        frames.at(t, j) = (frames.at(t, j) - m.mean[j]) * m.inv_std[j];
      }
    }
  }
  return out;
}

FoldPlan make_folds(const std::vector<std::string>& speaker_ids, std::size_t n_folds,
                    std::uint64_t seed) {
  if (n_folds == 0) throw InvalidArgument("make_folds: n_folds must be >= 1");
  if (speaker_ids.empty() || speaker_ids.size() % n_folds != 0) {
    throw ConfigError("make_folds: " + std::to_string(speaker_ids.size()) +
                      " speakers cannot be divided into " + std::to_string(n_folds) +
                      " equal test groups");
  }
  const std::size_t group = speaker_ids.size() / n_folds;

  std::vector<std::size_t> order(speaker_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  nn::Rng rng(seed);
  rng.shuffle(order);

  FoldPlan plan;
  plan.folds.resize(n_folds);
  for (std::size_t f = 0; f < n_folds; ++f) {
    Fold& fold = plan.folds[f];
    const std::size_t dev_group = (f + 1) % n_folds;
    for (std::size_t g = 0; g < n_folds; ++g) {
      for (std::size_t i = 0; i < group; ++i) {
        const std::string& id = speaker_ids[order[g * group + i]];
        if (g == f) {
          fold.test.push_back(id);
        } else if (g == dev_group) {
          fold.dev.push_back(id);
        } else {
          fold.train.push_back(id);
        }
      }
    }
  }
  return plan;
}

Tensor tandem_concat(const Tensor& learned, const Tensor& base) {
  // A width-0 (or absent) side contributes nothing.
  const bool no_learned =
      learned.rank() == 0 || (learned.rank() == 2 && learned.cols() == 0);
  const bool no_base = base.rank() == 0 || (base.rank() == 2 && base.cols() == 0);
  if (no_learned && no_base) return learned;
  if (no_learned) return base;
  if (no_base) return learned;
  if (learned.rank() != 2 || base.rank() != 2 || learned.rows() != base.rows()) {
    throw DimensionError("tandem_concat: row counts differ (" +
                         shape_string(learned.shape) + " vs " +
                         shape_string(base.shape) + ")");
  }
  return nn::t_concat_cols(learned, base);
}

}  // namespace mvlatent::data
