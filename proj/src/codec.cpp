#include "meshforge/codec.hpp"

#include <absl/container/flat_hash_map.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "binary_io.hpp"

namespace meshforge {

namespace {

constexpr double kQuantizeSlack = 1e-6;

std::uint64_t lattice_key(const LatticePoint& p) {
  return (std::uint64_t{p[0]} << 32) | (std::uint64_t{p[1]} << 16) | p[2];
}

}  // namespace

void CodecConfig::validate() const {
  if (blocks < 1 || block_size < 1) throw std::invalid_argument("codec: B and O must be >= 1");
  if (blocks > 0xFFFF || block_size > 0xFFFF) throw std::invalid_argument("codec: B and O must fit in 16 bits");
  if (std::uint64_t{blocks} * block_size > (1u << 16)) {
    throw std::invalid_argument("codec: R = B * O must not exceed 65536");
  }
  if (vocabulary_size() > 0xFFFFFFFFull) throw std::invalid_argument("codec: vocabulary exceeds 32-bit tokens");
}

QuantizedMesh quantize(const TriangleMesh& mesh, const CodecConfig& cfg,
                       const NormalizationTransform& source_transform) {
  cfg.validate();
  validate(mesh);
  const double r = cfg.resolution();
  QuantizedMesh qm;
  qm.source_transform = source_transform;

  absl::flat_hash_map<std::uint64_t, std::uint32_t> index_of;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    LatticePoint q{};
    for (int a = 0; a < 3; ++a) {
      const double c = mesh.vertices[i][static_cast<std::size_t>(a)];
      if (!(c >= -1.0 - kQuantizeSlack && c <= 1.0 + kQuantizeSlack)) {
        throw std::invalid_argument("quantize: vertex " + std::to_string(i) +
                                    " lies outside [-1,1]^3; normalize the mesh first");
      }
      const double cell = std::floor((c + 1.0) / 2.0 * r);
      q[a] = static_cast<std::uint32_t>(std::clamp(cell, 0.0, r - 1.0));
    }
    auto [it, inserted] = index_of.try_emplace(lattice_key(q), static_cast<std::uint32_t>(qm.vertices.size()));
    if (inserted) {
      qm.vertices.push_back(q);
    } else {
      ++qm.merged_vertices;
    }
    remap[i] = it->second;
  }
  for (const auto& t : mesh.triangles) {
    const Triangle m{remap[t[0]], remap[t[1]], remap[t[2]]};
    if (m[0] == m[1] || m[1] == m[2] || m[0] == m[2]) {
      ++qm.dropped_triangles;
      continue;
    }
    qm.triangles.push_back(m);
  }
  return qm;
}

TriangleMesh dequantize(const QuantizedMesh& qm, const CodecConfig& cfg) {
  cfg.validate();
  const double r = cfg.resolution();
  TriangleMesh mesh;
  mesh.vertices.reserve(qm.vertices.size());
  for (const auto& q : qm.vertices) {
    mesh.vertices.push_back({(q[0] + 0.5) / r * 2.0 - 1.0, (q[1] + 0.5) / r * 2.0 - 1.0,
                             (q[2] + 0.5) / r * 2.0 - 1.0});
  }
  mesh.triangles = qm.triangles;
  return mesh;
}

BlockIndex block_index(const LatticePoint& v, const CodecConfig& cfg) {
  const std::uint32_t r = cfg.resolution();
  const std::uint32_t b = cfg.blocks;
  const std::uint32_t o = cfg.block_size;
  for (auto c : v) {
    if (c >= r) throw std::out_of_range("block_index: coordinate " + std::to_string(c) + " outside [0, R)");
  }
  return {(v[0] / o) * b * b + (v[1] / o) * b + v[2] / o, (v[0] % o) * o * o + (v[1] % o) * o + v[2] % o};
}

LatticePoint block_index_inverse(const BlockIndex& bo, const CodecConfig& cfg) {
  const std::uint32_t b = cfg.blocks;
  const std::uint32_t o = cfg.block_size;
  if (bo.block >= cfg.block_count() || bo.offset >= cfg.offset_count()) {
    throw std::out_of_range("block_index_inverse: token out of range");
  }
  const std::uint32_t bx = bo.block / (b * b);
  const std::uint32_t by = (bo.block / b) % b;
  const std::uint32_t bz = bo.block % b;
  const std::uint32_t ox = bo.offset / (o * o);
  const std::uint32_t oy = (bo.offset / o) % o;
  const std::uint32_t oz = bo.offset % o;
  return {bx * o + ox, by * o + oy, bz * o + oz};
}

TokenKind token_kind(std::uint32_t token, const CodecConfig& cfg) {
  const std::uint64_t blocks = cfg.block_count();
  if (token < blocks) return TokenKind::kBlock;
  if (token < 2 * blocks) return TokenKind::kPatchStart;
  if (token < 2 * blocks + cfg.offset_count()) return TokenKind::kOffset;
  return TokenKind::kInvalid;
}

namespace {

struct Patch {
  std::uint32_t center;
  std::vector<std::uint32_t> ring;
};

// Splits the uncovered triangles around `center` into maximal
// orientation-consistent fans. Triangle (center, u, v) contributes the ring
// step u -> v; chains start where a vertex has more outgoing than incoming
// steps, leftover cycles close on their first vertex.
std::vector<Patch> build_fans(std::uint32_t center, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& steps,
                              const std::vector<BlockIndex>& order) {
  auto less = [&](std::uint32_t a, std::uint32_t b) { return order[a] < order[b]; };
  std::map<std::uint32_t, std::vector<std::uint32_t>, decltype(less)> out(less);
  std::map<std::uint32_t, int, decltype(less)> balance(less);
  for (const auto& [u, v] : steps) {
    out[u].push_back(v);
    out[v];
    ++balance[u];
    --balance[v];
  }
  for (auto& [u, targets] : out) {
    // Consume smallest targets first; stored reversed so pop_back() is cheap.
    std::sort(targets.begin(), targets.end(), [&](auto a, auto b) { return less(b, a); });
  }

  std::vector<Patch> patches;
  std::size_t remaining = steps.size();
  while (remaining > 0) {
    std::uint32_t start = 0;
    bool found = false;
    for (const auto& [u, bal] : balance) {
      if (bal > 0 && !out[u].empty()) {
        start = u;
        found = true;
        break;
      }
    }
    if (!found) {
      for (const auto& [u, targets] : out) {
        if (!targets.empty()) {
          start = u;
          break;
        }
      }
    }
    Patch p{center, {start}};
    std::uint32_t cur = start;
    while (!out[cur].empty()) {
      const std::uint32_t next = out[cur].back();
      out[cur].pop_back();
      --balance[cur];
      ++balance[next];
      --remaining;
      p.ring.push_back(next);
      cur = next;
    }
    patches.push_back(std::move(p));
  }
  return patches;
}

}  // namespace

TokenSequence encode(const QuantizedMesh& qm, const CodecConfig& cfg) {
  cfg.validate();
  TokenSequence ts{cfg, {}};
  if (qm.triangles.empty()) return ts;

  const std::size_t nv = qm.vertices.size();
  std::vector<BlockIndex> order(nv);
  for (std::size_t v = 0; v < nv; ++v) order[v] = block_index(qm.vertices[v], cfg);

  std::vector<std::vector<std::uint32_t>> incident(nv);
  for (std::uint32_t t = 0; t < qm.triangles.size(); ++t) {
    for (auto v : qm.triangles[t]) {
      if (v >= nv) throw std::invalid_argument("encode: triangle index out of range");
      incident[v].push_back(t);
    }
  }
  std::vector<std::size_t> uncovered(nv);
  // Max-heap on uncovered count, ties toward the smallest (b, o).
  auto rank = [&](std::uint32_t v) {
    return std::make_tuple(-static_cast<std::int64_t>(uncovered[v]), order[v].block, order[v].offset, v);
  };
  std::set<std::tuple<std::int64_t, std::uint32_t, std::uint32_t, std::uint32_t>> queue;
  for (std::uint32_t v = 0; v < nv; ++v) {
    uncovered[v] = incident[v].size();
    if (uncovered[v] > 0) queue.insert(rank(v));
  }

  std::vector<bool> covered(qm.triangles.size(), false);
  std::vector<Patch> patches;
  while (!queue.empty()) {
    const std::uint32_t c = std::get<3>(*queue.begin());
    std::vector<std::pair<std::uint32_t, std::uint32_t>> steps;
    std::vector<std::uint32_t> taken;
    for (auto t : incident[c]) {
      if (covered[t]) continue;
      const auto& tri = qm.triangles[t];
      const int k = tri[0] == c ? 0 : tri[1] == c ? 1 : 2;
      steps.emplace_back(tri[(k + 1) % 3], tri[(k + 2) % 3]);
      taken.push_back(t);
    }
    for (auto t : taken) {
      covered[t] = true;
      for (auto v : qm.triangles[t]) {
        queue.erase(rank(v));
        --uncovered[v];
        if (uncovered[v] > 0) queue.insert(rank(v));
      }
    }
    for (auto& p : build_fans(c, steps, order)) patches.push_back(std::move(p));
  }

  std::stable_sort(patches.begin(), patches.end(),
                   [&](const Patch& a, const Patch& b) { return order[a.center] < order[b.center]; });
  const auto blocks = static_cast<std::uint32_t>(cfg.block_count());
  const std::uint32_t offset_base = 2 * blocks;
  for (const auto& p : patches) {
    ts.tokens.push_back(order[p.center].block + blocks);
    ts.tokens.push_back(order[p.center].offset + offset_base);
    for (auto v : p.ring) {
      ts.tokens.push_back(order[v].block);
      ts.tokens.push_back(order[v].offset + offset_base);
    }
  }
  return ts;
}

GrammarError::GrammarError(std::size_t position, const std::string& what)
    : std::runtime_error("token " + std::to_string(position) + ": " + what), position_(position) {}

namespace {

// Walks the grammar; `on_patch(center, ring, start_position)` is called for
// each complete patch.
template <typename OnPatch>
void parse_tokens(const TokenSequence& ts, OnPatch&& on_patch) {
  const CodecConfig& cfg = ts.config;
  cfg.validate();
  const auto& tok = ts.tokens;
  const auto blocks = static_cast<std::uint32_t>(cfg.block_count());
  const std::uint32_t offset_base = 2 * blocks;
  std::size_t i = 0;
  std::vector<BlockIndex> ring;
  // A stream that stops early is reported at its last token.
  auto at = [&](std::size_t pos) { return std::min(pos, tok.size() - 1); };
  while (i < tok.size()) {
    const std::size_t start = i;
    if (token_kind(tok[i], cfg) != TokenKind::kPatchStart) {
      throw GrammarError(i, "expected a patch-start block token");
    }
    const BlockIndex center{tok[i] - blocks, 0};
    ++i;
    if (i >= tok.size() || token_kind(tok[i], cfg) != TokenKind::kOffset) {
      throw GrammarError(at(i), "expected the center offset token");
    }
    BlockIndex c = center;
    c.offset = tok[i] - offset_base;
    ++i;
    ring.clear();
    while (i < tok.size() && token_kind(tok[i], cfg) != TokenKind::kPatchStart) {
      if (token_kind(tok[i], cfg) != TokenKind::kBlock) throw GrammarError(i, "expected a block token");
      if (i + 1 >= tok.size() || token_kind(tok[i + 1], cfg) != TokenKind::kOffset) {
        throw GrammarError(at(i + 1), "block token must be followed by an offset token");
      }
      ring.push_back({tok[i], tok[i + 1] - offset_base});
      i += 2;
    }
    if (ring.size() < 2) throw GrammarError(at(i), "patch needs at least two ring vertices");
    on_patch(c, ring, start);
  }
}

}  // namespace

QuantizedMesh decode(const TokenSequence& ts) {
  QuantizedMesh qm;
  absl::flat_hash_map<std::uint64_t, std::uint32_t> index_of;
  auto vertex = [&](const BlockIndex& bo) {
    const LatticePoint p = block_index_inverse(bo, ts.config);
    auto [it, inserted] = index_of.try_emplace(lattice_key(p), static_cast<std::uint32_t>(qm.vertices.size()));
    if (inserted) qm.vertices.push_back(p);
    return it->second;
  };
  parse_tokens(ts, [&](const BlockIndex& center, const std::vector<BlockIndex>& ring, std::size_t start) {
    const std::uint32_t c = vertex(center);
    std::uint32_t prev = vertex(ring[0]);
    for (std::size_t k = 1; k < ring.size(); ++k) {
      const std::uint32_t cur = vertex(ring[k]);
      if (cur == prev || cur == c || prev == c) {
        throw GrammarError(start + 2 * k + 2, "patch produces a degenerate triangle");
      }
      qm.triangles.push_back({c, prev, cur});
      prev = cur;
    }
  });
  return qm;
}

std::size_t validate_tokens(const TokenSequence& ts, std::string* message) {
  try {
    parse_tokens(ts, [](const BlockIndex&, const std::vector<BlockIndex>&, std::size_t) {});
  } catch (const GrammarError& e) {
    if (message != nullptr) *message = e.what();
    return e.position();
  }
  return ts.tokens.size();
}

TokenStats token_stats(const TokenSequence& ts) {
  TokenStats s;
  s.token_count = ts.tokens.size();
  parse_tokens(ts, [&](const BlockIndex&, const std::vector<BlockIndex>& ring, std::size_t) {
    ++s.patch_count;
    s.triangle_count += ring.size() - 1;
  });
  if (s.patch_count > 0) {
    s.mean_patch_size = static_cast<double>(s.triangle_count) / static_cast<double>(s.patch_count);
    s.compression_ratio = static_cast<double>(s.token_count) / (9.0 * static_cast<double>(s.triangle_count));
  }
  return s;
}

void write_tokens(std::ostream& out, const TokenSequence& ts) {
  ts.config.validate();
  out.write("P3TK", 4);
  detail::write_le<std::uint8_t>(out, 1);
  detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(ts.config.blocks));
  detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(ts.config.block_size));
  detail::write_le<std::uint64_t>(out, ts.tokens.size());
  for (auto t : ts.tokens) detail::write_le<std::uint32_t>(out, t);
  if (!out) throw std::runtime_error("write_tokens: stream error");
}

TokenSequence read_tokens(std::istream& in) {
  detail::expect_magic(in, "P3TK");
  const auto version = detail::read_le<std::uint8_t>(in, "version");
  if (version != 1) throw std::runtime_error("token file: unsupported version " + std::to_string(version));
  TokenSequence ts;
  ts.config.blocks = detail::read_le<std::uint16_t>(in, "B");
  ts.config.block_size = detail::read_le<std::uint16_t>(in, "O");
  ts.config.validate();
  const auto count = detail::read_le<std::uint64_t>(in, "token count");
  // Grow as tokens arrive so a corrupt count cannot force a huge allocation.
  for (std::uint64_t i = 0; i < count; ++i) ts.tokens.push_back(detail::read_le<std::uint32_t>(in, "token"));
  return ts;
}

void save_tokens(const std::filesystem::path& path, const TokenSequence& ts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tokens(out, ts);
}

TokenSequence load_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_tokens(in);
}

}  // namespace meshforge
