#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "meshforge/codec.hpp"
#include "meshforge/field.hpp"
#include "meshforge/isosurface.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace meshforge;

namespace {

QuantizedMesh lattice_mesh(std::vector<LatticePoint> verts, std::vector<Triangle> tris) {
  QuantizedMesh qm;
  qm.vertices = std::move(verts);
  qm.triangles = std::move(tris);
  return qm;
}

// Triangles as coordinate triples with the smallest vertex first.
std::vector<std::array<LatticePoint, 3>> coordinate_triangles(const QuantizedMesh& qm) {
  std::vector<std::array<LatticePoint, 3>> out;
  for (const auto& t : qm.triangles) {
    std::array<LatticePoint, 3> c{qm.vertices[t[0]], qm.vertices[t[1]], qm.vertices[t[2]]};
    const auto m = std::min_element(c.begin(), c.end()) - c.begin();
    std::rotate(c.begin(), c.begin() + m, c.end());
    out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<LatticePoint> sorted_vertices(const QuantizedMesh& qm) {
  auto v = qm.vertices;
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("block_index worked values") {
  const CodecConfig cfg{16, 8};
  CHECK(block_index({0, 0, 0}, cfg) == BlockIndex{0, 0});
  CHECK(block_index({127, 127, 127}, cfg) == BlockIndex{4095, 511});
  CHECK(block_index({10, 3, 5}, cfg) == BlockIndex{256, 157});
  CHECK(block_index_inverse({256, 157}, cfg) == LatticePoint{10, 3, 5});
  CHECK(block_index_inverse({0, 0}, cfg) == LatticePoint{0, 0, 0});
  CHECK_THROWS_AS(block_index({128, 0, 0}, cfg), std::out_of_range);
  CHECK_THROWS_AS(block_index_inverse({4096, 0}, cfg), std::out_of_range);
  CHECK_THROWS_AS(block_index_inverse({0, 512}, cfg), std::out_of_range);
}

TEST_CASE("block_index matches a nested-loop enumeration") {
  for (std::uint32_t b : {1u, 2u, 4u, 8u, 16u, 32u}) {
    const CodecConfig cfg{b, 32 / b};
    const auto expected = testing::enumerate_block_indices(cfg.blocks, cfg.block_size);
    for (std::uint32_t x = 0; x < 32; ++x) {
      for (std::uint32_t y = 0; y < 32; ++y) {
        for (std::uint32_t z = 0; z < 32; ++z) {
          REQUIRE(block_index({x, y, z}, cfg) == expected[(x * 32 + y) * 32 + z]);
        }
      }
    }
  }
}

TEST_CASE("block_index inverse on random vertices") {
  std::mt19937_64 rng(11);
  for (const CodecConfig cfg : {CodecConfig{16, 8}, CodecConfig{8, 4}, CodecConfig{32, 16}, CodecConfig{3, 5}}) {
    std::uniform_int_distribution<std::uint32_t> coord(0, cfg.resolution() - 1);
    for (int i = 0; i < 100000; ++i) {
      const LatticePoint p{coord(rng), coord(rng), coord(rng)};
      const BlockIndex bo = block_index(p, cfg);
      REQUIRE(bo.block < cfg.block_count());
      REQUIRE(bo.offset < cfg.offset_count());
      REQUIRE(block_index_inverse(bo, cfg) == p);
    }
  }
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(CodecConfig{16, 8}.validate());
  CHECK_THROWS_AS((CodecConfig{0, 8}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((CodecConfig{8, 0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((CodecConfig{256, 256}.validate()));
  CHECK_THROWS_AS((CodecConfig{257, 256}.validate()), std::invalid_argument);
  CHECK(CodecConfig{16, 8}.vocabulary_size() == 2 * 4096 + 512);
}

TEST_CASE("quantize corners, merging and dropping") {
  const CodecConfig cfg{16, 8};
  TriangleMesh m;
  m.vertices = {{-1, -1, -1}, {1, 1, 1}, {0, 0, 0}, {0, 0, 1e-9}, {1e-9, 0, 0}, {0.5, 0.5, 0.5}};
  m.triangles = {{0, 1, 5}, {2, 3, 4}, {0, 2, 5}};
  const QuantizedMesh qm = quantize(m, cfg);
  CHECK(qm.vertices[0] == LatticePoint{0, 0, 0});
  CHECK(qm.vertices[1] == LatticePoint{127, 127, 127});
  CHECK(qm.vertices.size() == 4);
  CHECK(qm.merged_vertices == 2);
  CHECK(qm.dropped_triangles == 1);
  CHECK(qm.triangles.size() == 2);

  TriangleMesh outside;
  outside.vertices = {{1.01, 0, 0}, {0, 0, 0}, {0, 1, 0}};
  outside.triangles = {{0, 1, 2}};
  CHECK_THROWS_WITH_AS(quantize(outside, cfg), doctest::Contains("normalize"), std::invalid_argument);
}

TEST_CASE("quantize then dequantize lands on cell centers") {
  const CodecConfig cfg{4, 4};
  TriangleMesh m;
  m.vertices = {{-1, -1, -1}, {0.0, 0.1, -0.1}, {0.99, 0.99, 0.99}};
  m.triangles = {{0, 1, 2}};
  const TriangleMesh back = dequantize(quantize(m, cfg), cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    for (int a = 0; a < 3; ++a) CHECK(std::abs(back.vertices[i][a] - m.vertices[i][a]) <= 1.0 / 16 + 1e-12);
  }
}

TEST_CASE("single triangle is one patch of six tokens") {
  const CodecConfig cfg{16, 8};
  const auto qm = lattice_mesh({{10, 3, 5}, {0, 0, 0}, {127, 127, 127}}, {{0, 1, 2}});
  const TokenSequence ts = encode(qm, cfg);
  // Center: the vertex with the smallest (b, o); all have one uncovered triangle.
  const std::uint32_t b3 = 4096;
  const std::uint32_t off = 2 * b3;
  CHECK(ts.tokens == std::vector<std::uint32_t>{0 + b3, 0 + off, 4095, 511 + off, 256, 157 + off});
  const TokenStats s = token_stats(ts);
  CHECK(s.token_count == 6);
  CHECK(s.patch_count == 1);
  CHECK(s.triangle_count == 1);
  CHECK(s.compression_ratio == doctest::Approx(6.0 / 9.0));

  const QuantizedMesh back = decode(ts);
  CHECK(coordinate_triangles(back) == coordinate_triangles(qm));
}

TEST_CASE("closed six-fan is one patch of sixteen tokens") {
  const CodecConfig cfg{16, 8};
  std::vector<LatticePoint> v{{50, 50, 50}};
  const int dx[6] = {10, 5, -5, -10, -5, 5};
  const int dy[6] = {0, 9, 9, 0, -9, -9};
  for (int i = 0; i < 6; ++i) {
    v.push_back({static_cast<std::uint32_t>(50 + dx[i]), static_cast<std::uint32_t>(50 + dy[i]), 50});
  }
  std::vector<Triangle> t;
  for (std::uint32_t i = 0; i < 6; ++i) t.push_back({0, 1 + i, 1 + (i + 1) % 6});
  const auto qm = lattice_mesh(v, t);
  const TokenSequence ts = encode(qm, cfg);
  const TokenStats s = token_stats(ts);
  CHECK(s.token_count == 16);
  CHECK(s.patch_count == 1);
  CHECK(s.triangle_count == 6);
  CHECK(s.compression_ratio == doctest::Approx(16.0 / 54.0));
  // The closed fan repeats its first ring vertex.
  CHECK(ts.tokens[2] == ts.tokens[14]);
  CHECK(ts.tokens[3] == ts.tokens[15]);
  CHECK(coordinate_triangles(decode(ts)) == coordinate_triangles(qm));
}

TEST_CASE("empty mesh and empty stream") {
  const CodecConfig cfg{16, 8};
  const TokenSequence ts = encode(QuantizedMesh{}, cfg);
  CHECK(ts.tokens.empty());
  const QuantizedMesh qm = decode(ts);
  CHECK(qm.vertices.empty());
  CHECK(qm.triangles.empty());
  const TokenStats s = token_stats(ts);
  CHECK(s.token_count == 0);
  CHECK(s.patch_count == 0);
  CHECK(s.mean_patch_size == 0.0);
  CHECK(s.compression_ratio == 0.0);
}

TEST_CASE("grammar errors carry the token position") {
  const CodecConfig cfg{16, 8};
  const auto qm = lattice_mesh({{10, 3, 5}, {0, 0, 0}, {127, 127, 127}}, {{0, 1, 2}});
  const TokenSequence good = encode(qm, cfg);

  TokenSequence truncated = good;
  truncated.tokens.pop_back();
  CHECK(validate_tokens(truncated) == truncated.tokens.size() - 1);
  try {
    decode(truncated);
    FAIL("expected a grammar error");
  } catch (const GrammarError& e) {
    CHECK(e.position() == truncated.tokens.size() - 1);
  }

  TokenSequence orphan_offset = good;
  orphan_offset.tokens.insert(orphan_offset.tokens.begin() + 2, 8192);
  CHECK(validate_tokens(orphan_offset) == 2);

  TokenSequence out_of_range = good;
  out_of_range.tokens[4] = 9000;
  CHECK(validate_tokens(out_of_range) == 4);

  TokenSequence short_patch = good;
  short_patch.tokens.resize(4);
  CHECK(validate_tokens(short_patch) == 3);

  TokenSequence leading_block = good;
  leading_block.tokens[0] = 7;
  CHECK(validate_tokens(leading_block) == 0);

  CHECK(validate_tokens(good) == good.tokens.size());
}

TEST_CASE("round trip and idempotence on extracted meshes") {
  const auto sphere = sphere_field({0.05, -0.02, 0.01}, 0.7);
  const auto torus = torus_field(0.6, 0.25);
  ExtractionConfig ec;
  ec.final_resolution = 32;
  ec.coarse_resolution = 8;
  for (const auto& field : {sphere, torus}) {
    const TriangleMesh mesh = extract(*field, ec).mesh;
    for (std::uint32_t b : {8u, 16u, 32u}) {
      for (std::uint32_t o : {4u, 8u, 16u}) {
        const CodecConfig cfg{b, o};
        const QuantizedMesh qm = quantize(mesh, cfg);
        const TokenSequence ts = encode(qm, cfg);
        REQUIRE(validate_tokens(ts) == ts.tokens.size());
        for (auto t : ts.tokens) REQUIRE(token_kind(t, cfg) != TokenKind::kInvalid);
        const QuantizedMesh back = decode(ts);
        CHECK(sorted_vertices(back) == sorted_vertices(qm));
        CHECK(coordinate_triangles(back) == coordinate_triangles(qm));
        CHECK(encode(back, cfg) == ts);
        const TokenStats s = token_stats(ts);
        CHECK(s.triangle_count == qm.triangles.size());
        CHECK(s.token_count < 9 * qm.triangles.size());
      }
    }
  }
}

TEST_CASE("compression improves with patch size") {
  // Closed fans of growing valence around one center.
  const CodecConfig cfg{16, 8};
  double previous = 1e9;
  for (std::uint32_t n = 3; n <= 12; ++n) {
    std::vector<LatticePoint> v{{64, 64, 64}};
    for (std::uint32_t i = 0; i < n; ++i) {
      const double a = 2.0 * kPi * i / n;
      v.push_back({static_cast<std::uint32_t>(64 + std::lround(40 * std::cos(a))),
                   static_cast<std::uint32_t>(64 + std::lround(40 * std::sin(a))), 64});
    }
    std::vector<Triangle> t;
    for (std::uint32_t i = 0; i < n; ++i) t.push_back({0, 1 + i, 1 + (i + 1) % n});
    const TokenStats s = token_stats(encode(lattice_mesh(v, t), cfg));
    CHECK(s.compression_ratio < previous);
    previous = s.compression_ratio;
  }
}

TEST_CASE("token file layout is bit exact") {
  TokenSequence ts{CodecConfig{16, 8}, {4096, 8192, 1, 8193, 2, 8194}};
  std::stringstream buf;
  write_tokens(buf, ts);
  const std::string bytes = buf.str();
  REQUIRE(bytes.size() == 4 + 1 + 2 + 2 + 8 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "P3TK");
  CHECK(bytes[4] == 1);
  CHECK(static_cast<unsigned char>(bytes[5]) == 16);
  CHECK(bytes[6] == 0);
  CHECK(static_cast<unsigned char>(bytes[7]) == 8);
  CHECK(static_cast<unsigned char>(bytes[9]) == 6);
  CHECK(static_cast<unsigned char>(bytes[17]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[18]) == 0x10);  // 4096 little-endian
  std::stringstream in(bytes);
  CHECK(read_tokens(in) == ts);

  std::stringstream bad(std::string("P3TX") + bytes.substr(4));
  CHECK_THROWS(read_tokens(bad));
  std::stringstream cut(bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS(read_tokens(cut));
}

TEST_CASE("encode is deterministic") {
  const auto field = csg_union(sphere_field({-0.3, 0, 0}, 0.45), sphere_field({0.3, 0, 0}, 0.45));
  ExtractionConfig ec;
  ec.final_resolution = 32;
  ec.coarse_resolution = 8;
  const CodecConfig cfg{16, 8};
  const TriangleMesh mesh = extract(*field, ec).mesh;
  const QuantizedMesh qm = quantize(mesh, cfg);
  CHECK(encode(qm, cfg) == encode(qm, cfg));
}
