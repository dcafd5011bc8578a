#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshforge/geometry.hpp"
#include "meshforge/mesh.hpp"

namespace meshforge {

/// Lattice of R = blocks * block_size cells per axis.
struct CodecConfig {
  std::uint32_t blocks = 16;     // B
  std::uint32_t block_size = 8;  // O

  std::uint32_t resolution() const { return blocks * block_size; }
  std::uint64_t block_count() const { return std::uint64_t{blocks} * blocks * blocks; }
  std::uint64_t offset_count() const { return std::uint64_t{block_size} * block_size * block_size; }
  /// Size of the token vocabulary: regular blocks, patch-start blocks, offsets.
  std::uint64_t vocabulary_size() const { return 2 * block_count() + offset_count(); }

  /// Throws std::invalid_argument unless B >= 1, O >= 1, R <= 2^16 and every
  /// token fits in 32 bits.
  void validate() const;

  friend bool operator==(const CodecConfig&, const CodecConfig&) = default;
};

using LatticePoint = std::array<std::uint32_t, 3>;

struct QuantizedMesh {
  std::vector<LatticePoint> vertices;  // distinct
  std::vector<Triangle> triangles;
  /// Transform that took the source asset into [-1,1]^3 (identity if the
  /// input was already normalized).
  NormalizationTransform source_transform;
  std::size_t merged_vertices = 0;
  std::size_t dropped_triangles = 0;
};

/// floor((c + 1) / 2 * R) clamped to [0, R-1] per coordinate; coincident
/// vertices merged, triangles that collapse dropped. Throws
/// std::invalid_argument when a coordinate lies outside [-1-1e-6, 1+1e-6].
QuantizedMesh quantize(const TriangleMesh& mesh, const CodecConfig& cfg,
                       const NormalizationTransform& source_transform = {});

/// Cell centers mapped back into [-1,1]^3.
TriangleMesh dequantize(const QuantizedMesh& qm, const CodecConfig& cfg);

struct BlockIndex {
  std::uint32_t block = 0;
  std::uint32_t offset = 0;
  friend auto operator<=>(const BlockIndex&, const BlockIndex&) = default;
};

/// b = (x/O) B^2 + (y/O) B + z/O, o = (x%O) O^2 + (y%O) O + z%O.
BlockIndex block_index(const LatticePoint& v, const CodecConfig& cfg);
LatticePoint block_index_inverse(const BlockIndex& bo, const CodecConfig& cfg);

struct TokenSequence {
  CodecConfig config;
  std::vector<std::uint32_t> tokens;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

enum class TokenKind { kBlock, kPatchStart, kOffset, kInvalid };
TokenKind token_kind(std::uint32_t token, const CodecConfig& cfg);

/// Triangle fans around shared vertices. Each patch is
/// (patch-start block of the center, center offset, then (block, offset)
/// per ring vertex); a closed fan repeats its first ring vertex.
TokenSequence encode(const QuantizedMesh& qm, const CodecConfig& cfg);

class GrammarError : public std::runtime_error {
 public:
  GrammarError(std::size_t position, const std::string& what);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Single left-to-right pass; throws GrammarError naming the offending
/// token position. Vertices appear in first-use order.
QuantizedMesh decode(const TokenSequence& ts);

/// Grammar check without building the mesh. Returns the error position, or
/// tokens.size() when the stream is valid.
std::size_t validate_tokens(const TokenSequence& ts, std::string* message = nullptr);

struct TokenStats {
  std::size_t token_count = 0;
  std::size_t patch_count = 0;
  std::size_t triangle_count = 0;
  double mean_patch_size = 0.0;    // triangles per patch
  double compression_ratio = 0.0;  // token_count / (9 * triangles)
};

TokenStats token_stats(const TokenSequence& ts);

/// Binary stream: "P3TK", u8 version 1, u16 B, u16 O, u64 count, u32 tokens,
/// all little-endian.
void write_tokens(std::ostream& out, const TokenSequence& ts);
TokenSequence read_tokens(std::istream& in);
void save_tokens(const std::filesystem::path& path, const TokenSequence& ts);
TokenSequence load_tokens(const std::filesystem::path& path);

}  // namespace meshforge
