#pragma once

// Binary interchange formats. Every multi-byte integer and every binary32
// value is little-endian regardless of host byte order.
//
//   ARLG  distributions   "ARLG" u32 version  u32 flags  u64 n_samples  u32 vocab  f32[n*vocab]
//   ARLB  labels          "ARLB" u32 version  u64 n_samples  u32[n]
//   AREM  embeddings      "AREM" u32 version  u32 vocab  u32 dim  f32[vocab*dim]
//
// ARSM (packed similarity matrices) lives in sim_matrix.hpp.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arfuse/error.hpp"

namespace arfuse {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr double kRowSumTolerance = 1e-5;

enum class DistributionKind : std::uint32_t { logits = 0, probabilities = 1 };

/// One model's outputs: n_samples rows of vocab_size binary32 values.
class DistributionMatrix {
 public:
  DistributionMatrix() = default;
  DistributionMatrix(std::size_t n_samples, std::size_t vocab_size, DistributionKind kind)
      : n_samples_(n_samples), vocab_size_(vocab_size), kind_(kind), values_(n_samples * vocab_size, 0.0f) {}
  DistributionMatrix(std::size_t n_samples, std::size_t vocab_size, DistributionKind kind,
                     std::vector<float> values)
      : n_samples_(n_samples), vocab_size_(vocab_size), kind_(kind), values_(std::move(values)) {
    if (values_.size() != n_samples_ * vocab_size_)
      throw ShapeError("distribution payload has " + std::to_string(values_.size()) + " values, expected " +
                       std::to_string(n_samples_ * vocab_size_));
  }

  std::size_t n_samples() const noexcept { return n_samples_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  DistributionKind kind() const noexcept { return kind_; }
  bool is_probabilities() const noexcept { return kind_ == DistributionKind::probabilities; }

  std::span<const float> row(std::size_t s) const { return {values_.data() + s * vocab_size_, vocab_size_}; }
  std::span<float> row(std::size_t s) { return {values_.data() + s * vocab_size_, vocab_size_}; }
  float at(std::size_t s, std::size_t c) const { return values_[s * vocab_size_ + c]; }
  float& at(std::size_t s, std::size_t c) { return values_[s * vocab_size_ + c]; }

  const std::vector<float>& values() const noexcept { return values_; }

  /// Throws DataError on non-finite entries or, for probabilities, on a
  /// negative entry or a row sum outside 1 +/- 1e-5.
  void validate() const {
    for (std::size_t s = 0; s < n_samples_; ++s) {
      const auto r = row(s);
      double sum = 0.0;
      for (std::size_t c = 0; c < r.size(); ++c) {
        if (!std::isfinite(r[c]))
          throw DataError("non-finite value at row " + std::to_string(s) + ", column " + std::to_string(c));
        if (is_probabilities() && r[c] < 0.0f)
          throw DataError("negative probability at row " + std::to_string(s) + ", column " + std::to_string(c));
        sum += r[c];
      }
      if (is_probabilities() && std::abs(sum - 1.0) > kRowSumTolerance)
        throw DataError("probability row " + std::to_string(s) + " sums to " + std::to_string(sum));
    }
  }

  friend bool operator==(const DistributionMatrix&, const DistributionMatrix&) = default;

 private:
  std::size_t n_samples_ = 0;
  std::size_t vocab_size_ = 0;
  DistributionKind kind_ = DistributionKind::probabilities;
  std::vector<float> values_;
};

/// True class index per sample.
struct LabelVector {
  std::vector<std::uint32_t> labels;

  std::size_t n_samples() const noexcept { return labels.size(); }
  std::uint32_t operator[](std::size_t s) const { return labels[s]; }
  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t vocab_size, std::size_t dim, std::vector<float> values)
      : vocab_size_(vocab_size), dim_(dim), values_(std::move(values)) {
    if (values_.size() != vocab_size_ * dim_) throw ShapeError("embedding payload does not match vocab x dim");
  }

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> row(std::size_t v) const { return {values_.data() + v * dim_, dim_}; }
  const std::vector<float>& values() const noexcept { return values_; }

  double squared_norm(std::size_t v) const {
    double acc = 0.0;
    for (float x : row(v)) acc += static_cast<double>(x) * static_cast<double>(x);
    return acc;
  }

  /// Non-finite entries and all-zero rows are data errors.
  void validate() const {
    for (std::size_t v = 0; v < vocab_size_; ++v) {
      for (float x : row(v))
        if (!std::isfinite(x)) throw DataError("non-finite embedding value in row " + std::to_string(v));
      if (squared_norm(v) == 0.0)
        throw DataError("embedding row " + std::to_string(v) + " has zero norm; normalization undefined");
    }
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t vocab_size_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

/// Checks that labels pair with a distribution matrix: equal sample counts
/// and every label inside the vocabulary.
inline void check_paired(const DistributionMatrix& m, const LabelVector& labels) {
  if (m.n_samples() != labels.n_samples())
    throw ShapeError("sample count mismatch: distributions have " + std::to_string(m.n_samples()) +
                     " rows, labels have " + std::to_string(labels.n_samples()));
  for (std::size_t s = 0; s < labels.n_samples(); ++s)
    if (labels[s] >= m.vocab_size())
      throw DataError("label " + std::to_string(labels[s]) + " at sample " + std::to_string(s) +
                      " is outside vocabulary of size " + std::to_string(m.vocab_size()));
}

inline void check_same_shape(const DistributionMatrix& a, const DistributionMatrix& b) {
  if (a.n_samples() != b.n_samples() || a.vocab_size() != b.vocab_size())
    throw ShapeError("distribution shapes differ: " + std::to_string(a.n_samples()) + "x" +
                     std::to_string(a.vocab_size()) + " vs " + std::to_string(b.n_samples()) + "x" +
                     std::to_string(b.vocab_size()));
}

namespace io {

/// Append-only little-endian byte sink.
class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  template <class U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian cursor over a file image.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string path) : data_(data), path_(std::move(path)) {}

  void expect_magic(std::string_view m) {
    require(m.size(), "magic");
    const std::string_view got(reinterpret_cast<const char*>(data_.data() + pos_), m.size());
    if (got != m)
      throw FormatError(path_ + ": expected magic \"" + std::string(m) + "\", found \"" + printable(got) + "\"");
    pos_ += m.size();
  }
  void expect_version() {
    const std::uint32_t v = u32();
    if (v != kFormatVersion)
      throw FormatError(path_ + ": unsupported version " + std::to_string(v) + " (expected " +
                        std::to_string(kFormatVersion) + ")");
  }
  std::uint32_t u32() { return get_le<std::uint32_t>("header"); }
  std::uint64_t u64() { return get_le<std::uint64_t>("header"); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>("payload")); }
  std::span<const std::uint8_t> take(std::size_t n) {
    require(n, "payload");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  const std::string& path() const noexcept { return path_; }

  /// The payload must be exactly `expected` bytes; checked before any
  /// allocation sized from header counts.
  void expect_payload(std::uint64_t expected) const {
    if (remaining() != expected)
      throw LengthError(path_ + ": payload is " + std::to_string(remaining()) + " bytes, expected " +
                        std::to_string(expected) + " bytes (file " + std::to_string(data_.size()) +
                        " bytes, expected " + std::to_string(pos_ + expected) + ")");
  }

 private:
  static std::string printable(std::string_view s) {
    std::string out;
    for (char c : s) out += (c >= 32 && c < 127) ? c : '?';
    return out;
  }
  void require(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw LengthError(path_ + ": truncated " + what + ": need " + std::to_string(pos_ + n) +
                        " bytes, file has " + std::to_string(data_.size()));
  }
  template <class U>
  U get_le(const char* what) {
    require(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string path_;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

/// a*b*c, or LengthError if the product overflows 64 bits.
inline std::uint64_t checked_bytes(std::uint64_t a, std::uint64_t b, std::uint64_t width, const std::string& path) {
  constexpr auto max = std::numeric_limits<std::uint64_t>::max();
  if ((a != 0 && b > max / a) || (a * b != 0 && width > max / (a * b)))
    throw LengthError(path + ": header dimensions overflow");
  return a * b * width;
}

}  // namespace io

// ---------------------------------------------------------------------------
// ARLG

inline std::vector<std::uint8_t> encode_distributions(const DistributionMatrix& m) {
  m.validate();
  if (m.vocab_size() > std::numeric_limits<std::uint32_t>::max()) throw ArgumentError("vocab exceeds u32");
  io::ByteWriter w;
  w.magic("ARLG");
  w.u32(kFormatVersion);
  w.u32(m.is_probabilities() ? 1u : 0u);
  w.u64(m.n_samples());
  w.u32(static_cast<std::uint32_t>(m.vocab_size()));
  for (float v : m.values()) w.f32(v);
  return w.bytes();
}

inline DistributionMatrix decode_distributions(std::span<const std::uint8_t> bytes, const std::string& path) {
  io::ByteReader r(bytes, path);
  r.expect_magic("ARLG");
  r.expect_version();
  const std::uint32_t flags = r.u32();
  if (flags & ~1u) throw FormatError(path + ": unknown flag bits " + std::to_string(flags));
  const std::uint64_t n = r.u64();
  const std::uint32_t vocab = r.u32();
  r.expect_payload(io::checked_bytes(n, vocab, 4, path));
  std::vector<float> values(static_cast<std::size_t>(n) * vocab);
  for (float& v : values) v = r.f32();
  DistributionMatrix m(static_cast<std::size_t>(n), vocab,
                       (flags & 1u) ? DistributionKind::probabilities : DistributionKind::logits, std::move(values));
  try {
    m.validate();
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.message());
  }
  return m;
}

inline void write_distributions(const DistributionMatrix& m, const std::filesystem::path& path) {
  io::write_file(path, encode_distributions(m));
}

inline DistributionMatrix read_distributions(const std::filesystem::path& path) {
  return decode_distributions(io::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// ARLB

inline std::vector<std::uint8_t> encode_labels(const LabelVector& labels) {
  io::ByteWriter w;
  w.magic("ARLB");
  w.u32(kFormatVersion);
  w.u64(labels.n_samples());
  for (std::uint32_t v : labels.labels) w.u32(v);
  return w.bytes();
}

inline LabelVector decode_labels(std::span<const std::uint8_t> bytes, const std::string& path) {
  io::ByteReader r(bytes, path);
  r.expect_magic("ARLB");
  r.expect_version();
  const std::uint64_t n = r.u64();
  r.expect_payload(io::checked_bytes(n, 1, 4, path));
  LabelVector out;
  out.labels.resize(static_cast<std::size_t>(n));
  for (auto& v : out.labels) v = r.u32();
  return out;
}

inline void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
  io::write_file(path, encode_labels(labels));
}

inline LabelVector read_labels(const std::filesystem::path& path) {
  return decode_labels(io::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// AREM

inline std::vector<std::uint8_t> encode_embeddings(const EmbeddingMatrix& e) {
  e.validate();
  io::ByteWriter w;
  w.magic("AREM");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(e.vocab_size()));
  w.u32(static_cast<std::uint32_t>(e.dim()));
  for (float v : e.values()) w.f32(v);
  return w.bytes();
}

inline EmbeddingMatrix decode_embeddings(std::span<const std::uint8_t> bytes, const std::string& path) {
  io::ByteReader r(bytes, path);
  r.expect_magic("AREM");
  r.expect_version();
  const std::uint32_t vocab = r.u32();
  const std::uint32_t dim = r.u32();
  r.expect_payload(io::checked_bytes(vocab, dim, 4, path));
  std::vector<float> values(static_cast<std::size_t>(vocab) * dim);
  for (float& v : values) v = r.f32();
  EmbeddingMatrix e(vocab, dim, std::move(values));
  try {
    e.validate();
  } catch (const DataError& err) {
    throw DataError(path + ": " + err.message());
  }
  return e;
}

inline void write_embeddings(const EmbeddingMatrix& e, const std::filesystem::path& path) {
  io::write_file(path, encode_embeddings(e));
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(io::read_file(path), path.string());
}

}  // namespace arfuse
