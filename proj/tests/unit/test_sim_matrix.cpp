#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "arfuse/parallel.hpp"
#include "arfuse/sim_matrix.hpp"
#include "test_util.hpp"

using namespace arfuse;

namespace {

EmbeddingMatrix random_embeddings(std::uint64_t seed, std::size_t vocab, std::size_t dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(vocab * dim);
  for (float& x : v) x = g(rng);
  return EmbeddingMatrix(vocab, dim, std::move(v));
}

double naive_cosine(const EmbeddingMatrix& e, std::size_t i, std::size_t j) {
  double dot = 0, ni = 0, nj = 0;
  for (std::size_t d = 0; d < e.dim(); ++d) {
    dot += static_cast<double>(e.row(i)[d]) * e.row(j)[d];
    ni += static_cast<double>(e.row(i)[d]) * e.row(i)[d];
    nj += static_cast<double>(e.row(j)[d]) * e.row(j)[d];
  }
  return dot / std::sqrt(ni * nj);
}

}  // namespace

TEST(Quantize, FloorAndClamp) {
  EXPECT_EQ(quantize_similarity(1.0), 15);
  EXPECT_EQ(quantize_similarity(1.0000001), 15);
  EXPECT_EQ(quantize_similarity(0.999), 14);
  EXPECT_EQ(quantize_similarity(0.5), 7);
  EXPECT_EQ(quantize_similarity(0.0), 0);
  EXPECT_EQ(quantize_similarity(-0.7), 0);
  EXPECT_EQ(quantize_similarity(NAN), 0);
}

TEST(PackedLayout, SizesAndIndices) {
  EXPECT_EQ(PackedSimMatrix::nibble_count(5), 15u);
  EXPECT_EQ(PackedSimMatrix::payload_bytes(5), 8u);
  EXPECT_EQ(PackedSimMatrix::payload_bytes(4), 5u);
  EXPECT_EQ(PackedSimMatrix::payload_bytes(1), 1u);
  const PackedSimMatrix m(5);
  std::uint64_t expect = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i; j < 5; ++j) EXPECT_EQ(m.pair_index(i, j), expect++);
  EXPECT_EQ(m.pair_index(3, 1), m.pair_index(1, 3));
  EXPECT_THROW(m.lookup(5, 0), ArgumentError);
  EXPECT_THROW(m.sim_column(9), ArgumentError);
}

TEST(BuildSimMatrix, IdenticalRowsAreAllFifteen) {
  const EmbeddingMatrix e(6, 3, std::vector<float>(18, 0.3f));
  const auto m = build_sim_matrix(e, 4);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(m.nibble(i, j), 15);
  for (double v : m.sim_column(2)) EXPECT_EQ(v, 1.0);
}

TEST(BuildSimMatrix, OrthogonalRowsAreZeroOffDiagonal) {
  std::vector<float> v(16, 0.0f);
  for (std::size_t i = 0; i < 4; ++i) v[i * 4 + i] = 2.0f;
  const auto m = build_sim_matrix(EmbeddingMatrix(4, 4, v), 1);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(m.nibble(i, j), i == j ? 15 : 0);
}

TEST(BuildSimMatrix, ChunkInvariantAndMatchesNaiveOracle) {
  const auto e = random_embeddings(7, 64, 16);
  const auto a = build_sim_matrix(e, 7);
  const auto b = build_sim_matrix(e, 64);
  EXPECT_EQ(a, b);
  for (std::size_t chunk : {1u, 3u, 13u, 100u}) EXPECT_EQ(build_sim_matrix(e, chunk), a);
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t j = i; j < 64; ++j) {
      const std::uint8_t want = i == j ? 15 : quantize_similarity(naive_cosine(e, i, j));
      ASSERT_EQ(a.nibble(i, j), want) << i << "," << j;
    }
  }
}

TEST(BuildSimMatrix, ThreadCountDoesNotMatter) {
  const auto e = random_embeddings(8, 101, 9);
  parallel::set_threads(1);
  const auto a = build_sim_matrix(e, 5);
  parallel::set_threads(4);
  const auto b = build_sim_matrix(e, 5);
  parallel::set_threads(1);
  EXPECT_EQ(a.bytes(), b.bytes());
}

TEST(BuildSimMatrix, QuantizationErrorBound) {
  const auto e = random_embeddings(9, 40, 5);
  const auto m = build_sim_matrix(e, 6);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 40; ++j) {
      const double c = std::clamp(naive_cosine(e, i, j), 0.0, 1.0);
      EXPECT_LE(std::abs(m.lookup(i, j) - c), 1.0 / 15.0 + 1e-12);
      EXPECT_EQ(m.lookup(i, j), m.lookup(j, i));
    }
    EXPECT_EQ(m.lookup(i, i), 1.0);
  }
}

TEST(BuildSimMatrix, Errors) {
  std::vector<float> v(6, 1.0f);
  v[3] = v[4] = v[5] = 0.0f;
  EXPECT_THROW(build_sim_matrix(EmbeddingMatrix(2, 3, v), 2), DataError);
  EXPECT_THROW(build_sim_matrix(EmbeddingMatrix(2, 3, std::vector<float>(6, 1.0f)), 0), ArgumentError);
}

TEST(SimColumn, MatchesLookup) {
  const auto m = build_sim_matrix(random_embeddings(10, 30, 4), 8);
  for (std::size_t j = 0; j < 30; ++j) {
    const auto col = m.sim_column(j);
    EXPECT_EQ(col[j], 1.0);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(col[i], m.lookup(i, j));
  }
}

TEST(Arsm, RoundTripAndSizes) {
  arfuse::testing::TempDir dir;
  const auto m = build_sim_matrix(random_embeddings(11, 5, 3), 2);
  write_packed(m, dir / "s.arsm");
  EXPECT_EQ(std::filesystem::file_size(dir / "s.arsm"), 12u + 8u);
  EXPECT_EQ(read_packed(dir / "s.arsm"), m);
  // Dense round trip: every pair survives pack/unpack.
  const auto back = decode_packed(encode_packed(m), "mem");
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(back.nibble(i, j), m.nibble(i, j));
}

TEST(Arsm, RejectsDamage) {
  const auto m = build_sim_matrix(random_embeddings(12, 5, 3), 2);
  auto bytes = encode_packed(m);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_packed(truncated, "t.arsm"), LengthError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_packed(bad_magic, "m.arsm"), FormatError);
  auto bad_diag = bytes;
  bad_diag[12] &= 0xF0;
  EXPECT_THROW(decode_packed(bad_diag, "d.arsm"), DataError);
  auto bad_pad = bytes;
  bad_pad.back() |= 0xF0;
  EXPECT_THROW(decode_packed(bad_pad, "p.arsm"), DataError);
  EXPECT_THROW(PackedSimMatrix(5, std::vector<std::uint8_t>(7)), LengthError);
}

TEST(SimilarityFusion, MatrixLevelUsesSecondaryTopClass) {
  const std::vector<float> emb{1, 0, 0.5f, 0.9f, 0, 1};
  const auto sim = build_sim_matrix(EmbeddingMatrix(3, 2, emb), 3);
  const DistributionMatrix p1(1, 3, DistributionKind::probabilities, {0.5f, 0.3f, 0.2f});
  const DistributionMatrix p2(1, 3, DistributionKind::probabilities, {0.1f, 0.2f, 0.7f});
  const auto out = fuse_similarity(p1, p2, sim, SimilarityFusionConfig{1.0});
  const auto col = sim.sim_column(2);
  EXPECT_EQ(col[0], 0.0);
  EXPECT_EQ(col[2], 1.0);
  const double z = 0.3 * col[1] + 0.2;
  EXPECT_FLOAT_EQ(out.at(0, 0), 0.0f);
  EXPECT_NEAR(out.at(0, 1), 0.3 * col[1] / z, 1e-6);
  EXPECT_NEAR(out.at(0, 2), 0.2 / z, 1e-6);
  EXPECT_THROW(fuse_similarity(p1, p2, PackedSimMatrix(4), SimilarityFusionConfig{}), ShapeError);
}
