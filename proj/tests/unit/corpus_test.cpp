#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mvlatent/corpus.hpp"
#include "mvlatent/errors.hpp"
#include "mvlatent/tensor.hpp"

using namespace mvlatent;
using namespace mvlatent::data;
using nn::Tensor;

namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "mvlatent_corpus_test";
  fs::create_directories(dir);
  return dir / name;
}

// All values chosen exactly representable in 32-bit floats so the on-disk
// quantization is a no-op and round trips are bitwise.
MultiViewCorpus sample_corpus() {
  MultiViewCorpus corpus;
  corpus.d_x = 2;
  corpus.d_y = 3;
  corpus.label_alphabet = {"sil", "aa", "iy"};

  FrameSequence a;
  a.speaker_id = "spk00";
  a.utterance_id = "utt000";
  a.frames_x = Tensor::matrix(3, 2, {1.5, -0.25, 0.5, 2.0, -3.0, 0.125});
  a.frames_y =
      Tensor::matrix(3, 3, {0.0, 1.0, -1.5, 2.5, -0.5, 0.75, 4.0, 0.0, -2.0});
  a.labels = {0, 2, 1};
  corpus.sequences.push_back(a);

  FrameSequence b;
  b.speaker_id = "spk01";
  b.utterance_id = "utt000";
  b.frames_x = Tensor::matrix(2, 2, {8.0, -1.0, 0.0625, 7.5});
  b.frames_y = Tensor::matrix(2, 3, {1.0, 2.0, 3.0, -4.0, -5.0, -6.0});
  corpus.sequences.push_back(b);  // unlabeled sequence

  return corpus;
}

bool corpora_bitwise_equal(const MultiViewCorpus& lhs, const MultiViewCorpus& rhs) {
  if (lhs.d_x != rhs.d_x || lhs.d_y != rhs.d_y) return false;
  if (lhs.label_alphabet != rhs.label_alphabet) return false;
  if (lhs.sequences.size() != rhs.sequences.size()) return false;
  for (std::size_t i = 0; i < lhs.sequences.size(); ++i) {
    const FrameSequence& p = lhs.sequences[i];
    const FrameSequence& q = rhs.sequences[i];
    if (p.speaker_id != q.speaker_id || p.utterance_id != q.utterance_id)
      return false;
    if (!nn::bitwise_equal(p.frames_x, q.frames_x)) return false;
    if (!nn::bitwise_equal(p.frames_y, q.frames_y)) return false;
    if (p.labels != q.labels) return false;
  }
  return true;
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("corpus accessors") {
  MultiViewCorpus corpus = sample_corpus();
  CHECK(corpus.total_frames() == 5);
  CHECK(corpus.speaker_ids() == std::vector<std::string>{"spk00", "spk01"});
  CHECK(corpus.sequences[0].n_frames() == 3);
  CHECK(corpus.sequences[0].has_labels());
  CHECK_FALSE(corpus.sequences[1].has_labels());
}

TEST_CASE("corpus validation rejects inconsistencies") {
  SUBCASE("valid corpus passes") { CHECK_NOTHROW(validate(sample_corpus())); }
  SUBCASE("empty speaker id") {
    MultiViewCorpus corpus = sample_corpus();
    corpus.sequences[1].speaker_id = "";
    CHECK_THROWS_AS(validate(corpus), InvalidArgument);
  }
  SUBCASE("x dimension mismatch") {
    MultiViewCorpus corpus = sample_corpus();
    corpus.sequences[0].frames_x = Tensor::zeros({3, 4});
    CHECK_THROWS_AS(validate(corpus), DimensionError);
  }
  SUBCASE("view length mismatch") {
    MultiViewCorpus corpus = sample_corpus();
    corpus.sequences[0].frames_y = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(validate(corpus), DimensionError);
  }
  SUBCASE("label outside the alphabet") {
    MultiViewCorpus corpus = sample_corpus();
    corpus.sequences[0].labels = {0, 1, 3};
    CHECK_THROWS_AS(validate(corpus), InvalidArgument);
  }
  SUBCASE("label list of the wrong length") {
    MultiViewCorpus corpus = sample_corpus();
    corpus.sequences[0].labels = {0, 1};
    CHECK_THROWS(validate(corpus));
  }
}

TEST_CASE("corpus round trip is bitwise") {
  const fs::path path = temp_file("roundtrip.mvc");
  MultiViewCorpus corpus = sample_corpus();
  save_corpus(corpus, path);
  MultiViewCorpus loaded = load_corpus(path);
  CHECK(corpora_bitwise_equal(corpus, loaded));
}

TEST_CASE("empty corpus round-trips") {
  const fs::path path = temp_file("empty.mvc");
  MultiViewCorpus corpus;
  corpus.d_x = 7;
  corpus.d_y = 0;
  save_corpus(corpus, path);
  MultiViewCorpus loaded = load_corpus(path);
  CHECK(loaded.sequences.empty());
  CHECK(loaded.d_x == 7);
  CHECK(loaded.d_y == 0);
}

TEST_CASE("corrupted magic names the offset") {
  const fs::path path = temp_file("badmagic.mvc");
  save_corpus(sample_corpus(), path);
  std::vector<char> bytes = read_all(path);
  bytes[0] = 'X';
  write_all(path, bytes);
  CHECK_THROWS_WITH_AS(load_corpus(path),
                       doctest::Contains("bad magic at offset 0"), FormatError);
}

TEST_CASE("unsupported version is rejected") {
  const fs::path path = temp_file("badversion.mvc");
  save_corpus(sample_corpus(), path);
  std::vector<char> bytes = read_all(path);
  bytes[4] = 9;
  write_all(path, bytes);
  CHECK_THROWS_WITH_AS(load_corpus(path),
                       doctest::Contains("unsupported version 9"), FormatError);
}

TEST_CASE("truncated file reports the failing offset") {
  const fs::path path = temp_file("truncated.mvc");
  save_corpus(sample_corpus(), path);
  std::vector<char> bytes = read_all(path);
  const std::size_t cut = bytes.size() - 7;
  bytes.resize(cut);
  write_all(path, bytes);
  try {
    load_corpus(path);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    const std::string message = e.what();
    CHECK(message.find("unexpected end of file at offset") != std::string::npos);
  }
}

TEST_CASE("missing file raises an i/o error") {
  CHECK_THROWS_AS(load_corpus(temp_file("does_not_exist.mvc")), IoError);
}

TEST_CASE("header dimension inconsistency is caught on load") {
  // A sequence whose advertised frame count disagrees with the payload length
  // must not load silently; truncate mid frame-block to simulate it.
  const fs::path path = temp_file("shortblock.mvc");
  save_corpus(sample_corpus(), path);
  std::vector<char> bytes = read_all(path);
  bytes.resize(bytes.size() - 1);
  write_all(path, bytes);
  CHECK_THROWS_AS(load_corpus(path), FormatError);
}
