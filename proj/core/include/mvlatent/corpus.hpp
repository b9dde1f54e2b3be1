#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mvlatent/tensor.hpp"

namespace mvlatent::data {

using nn::Tensor;

/// One utterance: frame-synchronized views plus optional frame labels.
struct FrameSequence {
  std::string speaker_id;
  std::string utterance_id;
  Tensor frames_x;          // [T, d_x]
  Tensor frames_y;          // [T, d_y]; d_y may be 0 (single-view data)
  std::vector<int> labels;  // empty, or length T

  std::size_t n_frames() const { return frames_x.rows(); }
  bool has_labels() const { return !labels.empty(); }
};

struct MultiViewCorpus {
  std::vector<FrameSequence> sequences;
  std::size_t d_x = 0;
  std::size_t d_y = 0;
  std::vector<std::string> label_alphabet;  // labels index into this

  std::size_t total_frames() const;
  std::vector<std::string> speaker_ids() const;  // unique, in first-seen order
};

/// Throws on inconsistent dimensions, label/alphabet mismatches, or empty
/// speaker ids.
void validate(const MultiViewCorpus& corpus);

/// MVC1 container: "MVC1" magic, version byte, length-prefixed JSON header,
/// then per-sequence frame blocks as little-endian 32-bit floats (labels as
/// little-endian 32-bit integers). Values are quantized to 32-bit floats on
/// disk and widened back to 64-bit on load.
void save_corpus(const MultiViewCorpus& corpus, const std::filesystem::path& path);
MultiViewCorpus load_corpus(const std::filesystem::path& path);

}  // namespace mvlatent::data
