#pragma once

// Chunked cosine-similarity matrix over a vocabulary's embeddings, quantized
// to 4 bits and stored as the packed upper triangle (diagonal included).
//
// Pair (i, j) with i <= j has nibble index
//     i * V - i * (i - 1) / 2 + (j - i)
// and nibble k lives in byte k / 2, low nibble first.
//
// ARSM file: "ARSM" u32 version u32 vocab, then ceil(V (V + 1) / 4) bytes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "arfuse/error.hpp"
#include "arfuse/fusion.hpp"
#include "arfuse/parallel.hpp"
#include "arfuse/tensor_store.hpp"

namespace arfuse {

inline constexpr std::uint8_t kMaxNibble = 15;

/// floor(clamp(cos, 0, 1) * 15). Negative similarities carry no support.
inline std::uint8_t quantize_similarity(double cosine) {
  if (!(cosine > 0.0)) return 0;
  if (cosine >= 1.0) return kMaxNibble;
  return static_cast<std::uint8_t>(std::floor(cosine * kMaxNibble));
}

class PackedSimMatrix {
 public:
  PackedSimMatrix() = default;
  explicit PackedSimMatrix(std::size_t vocab_size)
      : vocab_size_(vocab_size), bytes_(payload_bytes(vocab_size), 0) {}
  PackedSimMatrix(std::size_t vocab_size, std::vector<std::uint8_t> bytes)
      : vocab_size_(vocab_size), bytes_(std::move(bytes)) {
    if (bytes_.size() != payload_bytes(vocab_size_))
      throw LengthError("packed similarity payload is " + std::to_string(bytes_.size()) + " bytes, expected " +
                        std::to_string(payload_bytes(vocab_size_)));
  }

  static std::uint64_t nibble_count(std::uint64_t vocab) { return vocab * (vocab + 1) / 2; }
  static std::uint64_t payload_bytes(std::uint64_t vocab) { return (nibble_count(vocab) + 1) / 2; }

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  std::uint64_t pair_index(std::size_t i, std::size_t j) const {
    check_index(i);
    check_index(j);
    if (i > j) std::swap(i, j);
    const std::uint64_t r = i;
    return r * vocab_size_ - r * (r - 1) / 2 + (j - i);  // r = 0 gives 0
  }

  std::uint8_t nibble(std::size_t i, std::size_t j) const { return nibble_at(pair_index(i, j)); }
  std::uint8_t nibble_at(std::uint64_t k) const {
    const std::uint8_t b = bytes_[static_cast<std::size_t>(k / 2)];
    return (k & 1) ? static_cast<std::uint8_t>(b >> 4) : static_cast<std::uint8_t>(b & 0x0F);
  }

  /// Sets a nibble that is currently zero. Safe to call concurrently for
  /// distinct nibbles, including two nibbles sharing a byte.
  void set_nibble_once(std::uint64_t k, std::uint8_t value) {
    const std::uint8_t bits = (k & 1) ? static_cast<std::uint8_t>(value << 4) : static_cast<std::uint8_t>(value & 0x0F);
    std::atomic_ref<std::uint8_t>(bytes_[static_cast<std::size_t>(k / 2)]).fetch_or(bits, std::memory_order_relaxed);
  }

  /// nibble / 15 for the unordered pair.
  double lookup(std::size_t i, std::size_t j) const { return nibble(i, j) / static_cast<double>(kMaxNibble); }

  /// Entry i is lookup(i, j).
  std::vector<double> sim_column(std::size_t j) const {
    check_index(j);
    std::vector<double> col(vocab_size_);
    for (std::size_t i = 0; i < vocab_size_; ++i) col[i] = lookup(i, j);
    return col;
  }

  friend bool operator==(const PackedSimMatrix&, const PackedSimMatrix&) = default;

 private:
  void check_index(std::size_t i) const {
    if (i >= vocab_size_)
      throw ArgumentError("class index " + std::to_string(i) + " out of range for vocabulary of " +
                          std::to_string(vocab_size_));
  }

  std::size_t vocab_size_ = 0;
  std::vector<std::uint8_t> bytes_;
};

/// cos(e_i, e_j) = <e_i, e_j> / sqrt(|e_i|^2 |e_j|^2), accumulated in double
/// in index order so every caller gets the same value for a pair.
inline double cosine_similarity(std::span<const float> a, std::span<const float> b, double sq_norm_a, double sq_norm_b) {
  double dot = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) dot += static_cast<double>(a[d]) * static_cast<double>(b[d]);
  return dot / std::sqrt(sq_norm_a * sq_norm_b);
}

/// Iterates chunk pairs (row block, column block >= row block) and quantizes
/// each pair i <= j. The result does not depend on chunk_size.
inline PackedSimMatrix build_sim_matrix(const EmbeddingMatrix& e, std::size_t chunk_size) {
  if (chunk_size == 0) throw ArgumentError("chunk size must be at least 1");
  e.validate();
  const std::size_t vocab = e.vocab_size();
  std::vector<double> sq_norms(vocab);
  for (std::size_t v = 0; v < vocab; ++v) sq_norms[v] = e.squared_norm(v);

  PackedSimMatrix out(vocab);
  // One task per row block; tasks write disjoint nibble ranges and bytes
  // shared at range edges are merged with atomic OR.
  parallel::for_blocks(vocab, chunk_size, [&](std::size_t, std::size_t row_begin, std::size_t row_end) {
    for (std::size_t col_begin = row_begin; col_begin < vocab; col_begin += chunk_size) {
      const std::size_t col_end = std::min(vocab, col_begin + chunk_size);
      for (std::size_t i = row_begin; i < row_end; ++i) {
        for (std::size_t j = std::max(i, col_begin); j < col_end; ++j) {
          const std::uint8_t q = i == j ? kMaxNibble
                                        : quantize_similarity(cosine_similarity(e.row(i), e.row(j), sq_norms[i], sq_norms[j]));
          if (q != 0) out.set_nibble_once(out.pair_index(i, j), q);
        }
      }
    }
  });
  return out;
}

inline std::vector<std::uint8_t> encode_packed(const PackedSimMatrix& m) {
  io::ByteWriter w;
  w.magic("ARSM");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(m.vocab_size()));
  w.raw(m.bytes());
  return w.bytes();
}

inline PackedSimMatrix decode_packed(std::span<const std::uint8_t> bytes, const std::string& path) {
  io::ByteReader r(bytes, path);
  r.expect_magic("ARSM");
  r.expect_version();
  const std::uint32_t vocab = r.u32();
  r.expect_payload(PackedSimMatrix::payload_bytes(vocab));
  const auto payload = r.take(r.remaining());
  PackedSimMatrix m(vocab, std::vector<std::uint8_t>(payload.begin(), payload.end()));
  for (std::size_t i = 0; i < vocab; ++i)
    if (m.nibble(i, i) != kMaxNibble)
      throw DataError(path + ": diagonal nibble of class " + std::to_string(i) + " is not 15");
  if (PackedSimMatrix::nibble_count(vocab) % 2 == 1 && (m.bytes().back() >> 4) != 0)
    throw DataError(path + ": nonzero padding nibble");
  return m;
}

inline void write_packed(const PackedSimMatrix& m, const std::filesystem::path& path) {
  io::write_file(path, encode_packed(m));
}

inline PackedSimMatrix read_packed(const std::filesystem::path& path) {
  return decode_packed(io::read_file(path), path.string());
}

/// Similarity fusion over whole matrices: each primary row is converted to
/// probabilities and weighted by the similarity column of the secondary
/// model's top class raised to cfg.p.
inline DistributionMatrix fuse_similarity(const DistributionMatrix& primary, const DistributionMatrix& secondary,
                                          const PackedSimMatrix& sim, const SimilarityFusionConfig& cfg) {
  check_same_shape(primary, secondary);
  cfg.validate();
  if (sim.vocab_size() != primary.vocab_size())
    throw ShapeError("similarity matrix vocabulary " + std::to_string(sim.vocab_size()) +
                     " does not match distributions " + std::to_string(primary.vocab_size()));
  const DistributionMatrix p1 = to_probabilities(primary);
  DistributionMatrix out(p1.n_samples(), p1.vocab_size(), DistributionKind::probabilities);
  parallel::for_each_index(p1.n_samples(), [&](std::size_t s) {
    const std::size_t top = argmax(secondary.row(s));
    const std::vector<double> col = sim.sim_column(top);
    store_row(out.row(s), fuse_similarity(p1.row(s), std::span<const double>(col), cfg));
  });
  return out;
}

}  // namespace arfuse
