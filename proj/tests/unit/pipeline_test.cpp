#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "mvlatent/corpus.hpp"
#include "mvlatent/errors.hpp"
#include "mvlatent/pipeline.hpp"
#include "mvlatent/rng.hpp"
#include "mvlatent/tensor.hpp"
#include "mvlatent/tensor_ops.hpp"

using namespace mvlatent;
using namespace mvlatent::data;
using nn::Rng;
using nn::Tensor;

namespace {

FrameSequence make_sequence(const std::string& speaker, const Tensor& x,
                            const Tensor& y) {
  FrameSequence seq;
  seq.speaker_id = speaker;
  seq.utterance_id = "utt000";
  seq.frames_x = x;
  seq.frames_y = y;
  return seq;
}

MultiViewCorpus random_corpus(std::uint64_t seed) {
  MultiViewCorpus corpus;
  corpus.d_x = 3;
  corpus.d_y = 2;
  Rng rng(seed);
  const std::vector<std::string> speakers = {"spk00", "spk01", "spk02"};
  for (const auto& speaker : speakers) {
    for (int utt = 0; utt < 2; ++utt) {
      Tensor x = Tensor::zeros({10, 3});
      Tensor y = Tensor::zeros({10, 2});
      for (auto& v : x.data) v = 2.0 * rng.normal() + 0.5;
      for (auto& v : y.data) v = 0.3 * rng.normal() - 1.0;
      FrameSequence seq = make_sequence(speaker, x, y);
      seq.utterance_id = "utt" + std::to_string(utt);
      corpus.sequences.push_back(std::move(seq));
    }
  }
  return corpus;
}

}  // namespace

TEST_CASE("window of width one is the identity") {
  Tensor x = Tensor::matrix(3, 2, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  FrameSequence seq = make_sequence("spk00", x, Tensor::zeros({3, 0}));
  Tensor w = window_frames(seq, View::x, 1);
  CHECK(nn::bitwise_equal(w, x));
}

TEST_CASE("three-frame window replicates the edges") {
  const double a = 1.25, b = -2.0, c = 7.5;
  Tensor x = Tensor::matrix(3, 1, {a, b, c});
  FrameSequence seq = make_sequence("spk00", x, Tensor::zeros({3, 0}));
  Tensor w = window_frames(seq, View::x, 3);
  REQUIRE(w.rows() == 3);
  REQUIRE(w.cols() == 3);
  CHECK(nn::bitwise_equal(w, Tensor::matrix(3, 3, {a, a, b, a, b, c, b, c, c})));
}

TEST_CASE("window keeps the shape law and the center column block") {
  Rng rng(99);
  Tensor x = Tensor::zeros({7, 4});
  for (auto& v : x.data) v = rng.normal();
  FrameSequence seq = make_sequence("spk00", x, Tensor::zeros({7, 0}));
  for (std::size_t W : {1u, 3u, 5u, 9u}) {
    Tensor w = window_frames(seq, View::x, W);
    CHECK(w.rows() == 7);
    CHECK(w.cols() == 4 * W);
    // Extracting the central d-column block of every row recovers the input.
    Tensor center = nn::t_slice_cols(w, 4 * ((W - 1) / 2), 4);
    CHECK(nn::bitwise_equal(center, x));
  }
}

TEST_CASE("even window widths are rejected") {
  FrameSequence seq =
      make_sequence("spk00", Tensor::zeros({3, 2}), Tensor::zeros({3, 0}));
  CHECK_THROWS_AS(window_frames(seq, View::x, 2), InvalidArgument);
  CHECK_THROWS_AS(window_frames(seq, View::x, 0), InvalidArgument);
}

TEST_CASE("windowed aligned views have equal row counts") {
  MultiViewCorpus corpus = random_corpus(3);
  for (const auto& seq : corpus.sequences) {
    Tensor wx = window_frames(seq, View::x, 5);
    Tensor wy = window_frames(seq, View::y, 3);
    CHECK(wx.rows() == wy.rows());
  }
}

TEST_CASE("window_corpus stacks sequences with speaker bookkeeping") {
  MultiViewCorpus corpus = random_corpus(4);
  corpus.label_alphabet = {"l0", "l1"};
  for (auto& seq : corpus.sequences) seq.labels.assign(seq.n_frames(), 1);

  WindowedView view = window_corpus(corpus, View::x, 3);
  CHECK(view.features.rows() == corpus.total_frames());
  CHECK(view.features.cols() == corpus.d_x * 3);
  CHECK(view.labels.size() == corpus.total_frames());
  CHECK(view.speaker.size() == corpus.total_frames());
  CHECK(view.speaker_ids == corpus.speaker_ids());
  CHECK(view.speaker.front() == 0);
  CHECK(view.speaker.back() == 2);

  SUBCASE("labels drop out when any sequence is unlabeled") {
    corpus.sequences[1].labels.clear();
    WindowedView partial = window_corpus(corpus, View::x, 3);
    CHECK(partial.labels.empty());
  }
}

TEST_CASE("per-speaker normalization hits zero mean and unit variance") {
  MultiViewCorpus corpus = random_corpus(11);
  MultiViewCorpus normalized = normalize_per_speaker(corpus, View::y);

  for (const auto& speaker : normalized.speaker_ids()) {
    std::vector<double> sum(corpus.d_y, 0.0), sumsq(corpus.d_y, 0.0);
    std::size_t n = 0;
    for (const auto& seq : normalized.sequences) {
      if (seq.speaker_id != speaker) continue;
      for (std::size_t t = 0; t < seq.n_frames(); ++t)
        for (std::size_t j = 0; j < corpus.d_y; ++j) {
          sum[j] += seq.frames_y.at(t, j);
          sumsq[j] += seq.frames_y.at(t, j) * seq.frames_y.at(t, j);
        }
      n += seq.n_frames();
    }
    for (std::size_t j = 0; j < corpus.d_y; ++j) {
      const double mean = sum[j] / static_cast<double>(n);
      const double var = sumsq[j] / static_cast<double>(n) - mean * mean;
      CHECK(std::abs(mean) < 1e-10);
      CHECK(std::abs(var - 1.0) < 1e-10);
    }
  }

  SUBCASE("the x view is untouched") {
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i)
      CHECK(nn::bitwise_equal(normalized.sequences[i].frames_x,
                              corpus.sequences[i].frames_x));
  }

  SUBCASE("idempotent within 1e-10") {
    MultiViewCorpus twice = normalize_per_speaker(normalized, View::y);
    for (std::size_t i = 0; i < twice.sequences.size(); ++i)
      CHECK(nn::max_abs_diff(twice.sequences[i].frames_y,
                             normalized.sequences[i].frames_y) < 1e-10);
  }
}

TEST_CASE("already standardized data passes through unchanged") {
  // Two frames at +1/-1 have mean 0 and population variance 1 exactly.
  MultiViewCorpus corpus;
  corpus.d_x = 1;
  corpus.d_y = 2;
  corpus.sequences.push_back(make_sequence(
      "spk00", Tensor::matrix(2, 1, {5.0, 6.0}),
      Tensor::matrix(2, 2, {1.0, -1.0, -1.0, 1.0})));
  MultiViewCorpus normalized = normalize_per_speaker(corpus, View::y);
  CHECK(nn::max_abs_diff(normalized.sequences[0].frames_y,
                         corpus.sequences[0].frames_y) < 1e-12);
}

TEST_CASE("constant dimensions are centered with a warning") {
  MultiViewCorpus corpus;
  corpus.d_x = 1;
  corpus.d_y = 2;
  corpus.sequences.push_back(make_sequence(
      "spk00", Tensor::zeros({3, 1}),
      Tensor::matrix(3, 2, {4.0, 1.0, 4.0, 2.0, 4.0, 3.0})));
  std::vector<std::string> warnings;
  MultiViewCorpus normalized = normalize_per_speaker(corpus, View::y, &warnings);
  for (std::size_t t = 0; t < 3; ++t)
    CHECK(normalized.sequences[0].frames_y.at(t, 0) == 0.0);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("spk00") != std::string::npos);
  CHECK(warnings[0].find("zero variance") != std::string::npos);
}

TEST_CASE("speakers with fewer than two frames are rejected") {
  MultiViewCorpus corpus;
  corpus.d_x = 1;
  corpus.d_y = 1;
  corpus.sequences.push_back(
      make_sequence("spk00", Tensor::matrix(1, 1, {1.0}), Tensor::matrix(1, 1, {2.0})));
  CHECK_THROWS_AS(normalize_per_speaker(corpus, View::y), InvalidArgument);
}

TEST_CASE("twelve speakers over six folds give the 8/2/2 split") {
  std::vector<std::string> speakers;
  for (int i = 0; i < 12; ++i) speakers.push_back("spk" + std::to_string(i));
  FoldPlan plan = make_folds(speakers, 6, 42);
  REQUIRE(plan.folds.size() == 6);

  std::set<std::string> test_union;
  for (const Fold& fold : plan.folds) {
    CHECK(fold.train.size() == 8);
    CHECK(fold.dev.size() == 2);
    CHECK(fold.test.size() == 2);

    std::set<std::string> all;
    for (const auto& id : fold.train) all.insert(id);
    for (const auto& id : fold.dev) all.insert(id);
    for (const auto& id : fold.test) all.insert(id);
    CHECK(all.size() == 12);  // disjoint within the fold and covering

    for (const auto& id : fold.test) {
      CHECK(test_union.count(id) == 0);  // test groups never repeat
      test_union.insert(id);
    }
  }
  CHECK(test_union.size() == 12);  // test sets partition all speakers

  SUBCASE("dev is the next test group cyclically") {
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      const Fold& fold = plan.folds[f];
      const Fold& next = plan.folds[(f + 1) % plan.folds.size()];
      std::set<std::string> dev(fold.dev.begin(), fold.dev.end());
      std::set<std::string> next_test(next.test.begin(), next.test.end());
      CHECK(dev == next_test);
    }
  }
}

TEST_CASE("fold plans are deterministic and permutation-consistent") {
  std::vector<std::string> speakers;
  for (int i = 0; i < 12; ++i) speakers.push_back("spk" + std::to_string(i));

  FoldPlan a = make_folds(speakers, 6, 7);
  FoldPlan b = make_folds(speakers, 6, 7);
  for (std::size_t f = 0; f < 6; ++f) {
    CHECK(a.folds[f].train == b.folds[f].train);
    CHECK(a.folds[f].dev == b.folds[f].dev);
    CHECK(a.folds[f].test == b.folds[f].test);
  }

  SUBCASE("relabeling speakers relabels the plan in place") {
    std::vector<std::string> renamed;
    for (const auto& id : speakers) renamed.push_back("alias_" + id);
    FoldPlan c = make_folds(renamed, 6, 7);
    auto rename = [](std::vector<std::string> v) {
      for (auto& id : v) id = "alias_" + id;
      return v;
    };
    for (std::size_t f = 0; f < 6; ++f) {
      CHECK(c.folds[f].train == rename(a.folds[f].train));
      CHECK(c.folds[f].dev == rename(a.folds[f].dev));
      CHECK(c.folds[f].test == rename(a.folds[f].test));
    }
  }

  SUBCASE("different seeds move speakers") {
    FoldPlan d = make_folds(speakers, 6, 8);
    bool any_difference = false;
    for (std::size_t f = 0; f < 6; ++f)
      if (d.folds[f].test != a.folds[f].test) any_difference = true;
    CHECK(any_difference);
  }
}

TEST_CASE("indivisible speaker counts are rejected") {
  std::vector<std::string> speakers = {"a", "b", "c", "d", "e"};
  CHECK_THROWS_AS(make_folds(speakers, 2, 1), ConfigError);
  CHECK_THROWS_AS(make_folds({}, 3, 1), ConfigError);
}

TEST_CASE("tandem concatenation puts learned features first") {
  Tensor learned = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
  Tensor base = Tensor::matrix(2, 3, {5.0, 6.0, 7.0, 8.0, 9.0, 10.0});
  Tensor out = tandem_concat(learned, base);
  REQUIRE(out.rows() == 2);
  REQUIRE(out.cols() == 5);
  CHECK(nn::bitwise_equal(
      out, Tensor::matrix(2, 5, {1.0, 2.0, 5.0, 6.0, 7.0, 3.0, 4.0, 8.0, 9.0, 10.0})));

  SUBCASE("an empty learned side returns the base") {
    CHECK(nn::bitwise_equal(tandem_concat(Tensor::zeros({2, 0}), base), base));
    CHECK(nn::bitwise_equal(tandem_concat(Tensor{}, base), base));
  }
  SUBCASE("an empty base side returns the learned features") {
    CHECK(nn::bitwise_equal(tandem_concat(learned, Tensor::zeros({2, 0})), learned));
    CHECK(nn::bitwise_equal(tandem_concat(learned, Tensor{}), learned));
  }
  SUBCASE("row mismatches are rejected") {
    CHECK_THROWS_AS(tandem_concat(learned, Tensor::zeros({3, 1})), DimensionError);
  }
}
