#include "mvlatent/corpus.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "mvlatent/errors.hpp"

namespace mvlatent::data {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'V', 'C', '1'};
constexpr std::uint8_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

  void u8(std::uint8_t v) { bytes(&v, 1); }

  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    bytes(b, 4);
  }

  void f32(float v) {
    std::uint32_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }

  void close() {
    out_.flush();
    if (!out_) throw IoError("write to " + path_.string() + " failed");
    out_.close();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string() + " for reading");
  }

  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(path_.string() + ": unexpected end of file at offset " +
                        std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())) +
                        " while reading " + what);
    }
    offset_ += n;
  }

  std::uint8_t u8(const char* what) {
    std::uint8_t v = 0;
    bytes(&v, 1, what);
    return v;
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }

  float f32(const char* what) {
    std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::size_t offset() const { return offset_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace

std::size_t MultiViewCorpus::total_frames() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.n_frames();
  return n;
}

std::vector<std::string> MultiViewCorpus::speaker_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : sequences) {
    bool seen = false;
    for (const auto& id : ids) {
      if (id == s.speaker_id) {
        seen = true;
        break;
      }
    }
    if (!seen) ids.push_back(s.speaker_id);
  }
  return ids;
}

void validate(const MultiViewCorpus& corpus) {
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    const FrameSequence& s = corpus.sequences[i];
    const std::string where = "sequence " + std::to_string(i) + " (" +
                              s.speaker_id + "/" + s.utterance_id + ")";
    if (s.speaker_id.empty()) {
      throw InvalidArgument("corpus: empty speaker id in sequence " + std::to_string(i));
    }
    if (s.frames_x.rank() != 2 || s.frames_x.cols() != corpus.d_x) {
      throw DimensionError("corpus: " + where + " x view must be [T, " +
                           std::to_string(corpus.d_x) + "]");
    }
    if (corpus.d_y == 0) {
      if (s.frames_y.numel() != 0) {
        throw DimensionError("corpus: " + where + " carries y frames but d_y is 0");
      }
    } else if (s.frames_y.rank() != 2 || s.frames_y.cols() != corpus.d_y ||
               s.frames_y.rows() != s.frames_x.rows()) {
      throw DimensionError("corpus: " + where + " y view must be [" +
                           std::to_string(s.frames_x.rows()) + ", " +
                           std::to_string(corpus.d_y) + "]");
    }
    if (!s.labels.empty()) {
      if (s.labels.size() != s.n_frames()) {
        throw DimensionError("corpus: " + where + " has " +
                             std::to_string(s.labels.size()) + " labels for " +
                             std::to_string(s.n_frames()) + " frames");
      }
      for (int label : s.labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= corpus.label_alphabet.size()) {
          throw InvalidArgument("corpus: " + where + " label " + std::to_string(label) +
                                " outside alphabet of size " +
                                std::to_string(corpus.label_alphabet.size()));
        }
      }
    }
  }
}

void save_corpus(const MultiViewCorpus& corpus, const std::filesystem::path& path) {
  validate(corpus);

  json header;
  header["d_x"] = corpus.d_x;
  header["d_y"] = corpus.d_y;
  header["label_alphabet"] = corpus.label_alphabet;
  json seq_index = json::array();
  for (const auto& s : corpus.sequences) {
    seq_index.push_back({{"speaker", s.speaker_id},
                         {"utterance", s.utterance_id},
                         {"frames", s.n_frames()},
                         {"has_labels", s.has_labels()}});
  }
  header["sequences"] = std::move(seq_index);
  const std::string header_text = header.dump();

  Writer w(path);
  w.bytes(kMagic, 4);
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(header_text.size()));
  w.bytes(header_text.data(), header_text.size());
  for (const auto& s : corpus.sequences) {
    for (double v : s.frames_x.data) w.f32(static_cast<float>(v));
    for (double v : s.frames_y.data) w.f32(static_cast<float>(v));
    for (int label : s.labels) w.u32(static_cast<std::uint32_t>(label));
  }
  w.close();
}

MultiViewCorpus load_corpus(const std::filesystem::path& path) {
  Reader r(path);

  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic at offset 0 (not an MVC1 file)");
  }
  const std::uint8_t version = r.u8("version");
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported version " +
                      std::to_string(version) + " at offset 4");
  }
  const std::uint32_t header_len = r.u32("header length");
  std::string header_text(header_len, '\0');
  r.bytes(header_text.data(), header_len, "header");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": malformed header JSON: " + e.what());
  }

  MultiViewCorpus corpus;
  try {
    corpus.d_x = header.at("d_x").get<std::size_t>();
    corpus.d_y = header.at("d_y").get<std::size_t>();
    corpus.label_alphabet = header.at("label_alphabet").get<std::vector<std::string>>();
    for (const auto& entry : header.at("sequences")) {
      FrameSequence s;
      s.speaker_id = entry.at("speaker").get<std::string>();
      s.utterance_id = entry.at("utterance").get<std::string>();
      const auto frames = entry.at("frames").get<std::size_t>();
      const bool has_labels = entry.at("has_labels").get<bool>();

      s.frames_x = Tensor::zeros({frames, corpus.d_x});
      for (auto& v : s.frames_x.data) v = static_cast<double>(r.f32("x frames"));
      s.frames_y = corpus.d_y == 0 ? Tensor{}
                                   : Tensor::zeros({frames, corpus.d_y});
      for (auto& v : s.frames_y.data) v = static_cast<double>(r.f32("y frames"));
      if (has_labels) {
        s.labels.resize(frames);
        for (auto& label : s.labels) {
          label = static_cast<int>(r.u32("labels"));
        }
      }
      corpus.sequences.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": header missing required fields: " + e.what());
  }

  validate(corpus);
  return corpus;
}

}  // namespace mvlatent::data
