#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvlatent/corpus.hpp"

namespace mvlatent::data {

enum class View { x, y };

/// Stack a W-frame window centered at each frame: row t is the concatenation
/// of frames t-(W-1)/2 .. t+(W-1)/2 in temporal order, replicating the first/
/// last frame past the sequence edges. Windows never cross sequences. W odd.
Tensor window_frames(const FrameSequence& seq, View view, std::size_t W);

/// The whole corpus windowed into one [total_frames, d*W] matrix plus flat
/// labels and per-frame speaker indices (into corpus.speaker_ids()).
struct WindowedView {
  Tensor features;               // [N, d*W]
  std::vector<int> labels;       // empty if any sequence lacks labels
  std::vector<std::size_t> speaker;  // length N
  std::vector<std::string> speaker_ids;
};

WindowedView window_corpus(const MultiViewCorpus& corpus, View view, std::size_t W);

/// Per speaker, per dimension: subtract the mean and divide by the population
/// standard deviation. Zero-variance dimensions pass through centered, with a
/// warning appended for each. Every speaker needs >= 2 frames.
MultiViewCorpus normalize_per_speaker(const MultiViewCorpus& corpus, View view,
                                      std::vector<std::string>* warnings = nullptr);

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
};

struct FoldPlan {
  std::vector<Fold> folds;
};

/// Shuffle speakers by seed into n_folds disjoint test groups; per fold the
/// dev set is the next group cyclically and the training set is the rest.
/// 12 speakers over 6 folds yields the 8/2/2 split.
FoldPlan make_folds(const std::vector<std::string>& speaker_ids, std::size_t n_folds,
                    std::uint64_t seed);

/// Row-wise concatenation with the learned features first: [learned | base].
Tensor tandem_concat(const Tensor& learned, const Tensor& base);

}  // namespace mvlatent::data
