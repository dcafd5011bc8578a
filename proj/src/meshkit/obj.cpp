#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "file_util.hpp"
#include "meshforge/meshkit.hpp"

namespace meshforge {

ObjError::ObjError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) words.push_back(line.substr(start, i - start));
  }
  return words;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_index(std::string_view s, long long& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// 1-based or negative reference into a list of `count` elements.
std::size_t resolve(long long idx, std::size_t count, std::size_t line, const char* what) {
  const auto n = static_cast<long long>(count);
  const long long zero_based = idx > 0 ? idx - 1 : n + idx;
  if (idx == 0 || zero_based < 0 || zero_based >= n) {
    throw ObjError(line, std::string(what) + " index " + std::to_string(idx) + " out of range (" +
                             std::to_string(count) + " defined)");
  }
  return static_cast<std::size_t>(zero_based);
}

}  // namespace

ObjData parse_obj(std::string_view text) {
  ObjData data;
  std::size_t normals = 0;
  std::size_t texcoords = 0;
  std::unordered_set<std::string> seen_materials;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::uint32_t> face;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto words = split_words(line);
    if (words.empty()) continue;
    const std::string_view kw = words[0];

    if (kw == "v" || kw == "vn") {
      if (words.size() < 4) throw ObjError(line_no, std::string(kw) + " needs three coordinates");
      double c[3];
      for (int a = 0; a < 3; ++a) {
        if (!parse_double(words[static_cast<std::size_t>(a) + 1], c[a])) {
          throw ObjError(line_no, "bad number '" + std::string(words[static_cast<std::size_t>(a) + 1]) + "'");
        }
      }
      if (kw == "v") {
        data.mesh.vertices.push_back({c[0], c[1], c[2]});
      } else {
        ++normals;
      }
    } else if (kw == "vt") {
      double u = 0.0;
      if (words.size() < 2 || !parse_double(words[1], u)) throw ObjError(line_no, "vt needs a coordinate");
      ++texcoords;
    } else if (kw == "f") {
      if (words.size() < 4) throw ObjError(line_no, "face needs at least three vertices");
      face.clear();
      for (std::size_t w = 1; w < words.size(); ++w) {
        const std::string_view ref = words[w];
        const std::size_t s1 = ref.find('/');
        long long vi = 0;
        if (!parse_index(ref.substr(0, s1), vi)) throw ObjError(line_no, "bad face vertex '" + std::string(ref) + "'");
        face.push_back(static_cast<std::uint32_t>(resolve(vi, data.mesh.vertices.size(), line_no, "vertex")));
        if (s1 == std::string_view::npos) continue;
        const std::string_view rest = ref.substr(s1 + 1);
        const std::size_t s2 = rest.find('/');
        const std::string_view vt = rest.substr(0, s2);
        long long idx = 0;
        if (!vt.empty()) {
          if (!parse_index(vt, idx)) throw ObjError(line_no, "bad texture index in '" + std::string(ref) + "'");
          resolve(idx, texcoords, line_no, "texture");
        }
        if (s2 == std::string_view::npos) {
          if (vt.empty()) throw ObjError(line_no, "bad face vertex '" + std::string(ref) + "'");
          continue;
        }
        if (!parse_index(rest.substr(s2 + 1), idx)) {
          throw ObjError(line_no, "bad normal index in '" + std::string(ref) + "'");
        }
        resolve(idx, normals, line_no, "normal");
      }
      ++data.polygon_count;
      for (std::size_t k = 1; k + 1 < face.size(); ++k) {
        const Triangle t{face[0], face[k], face[k + 1]};
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
          ++data.degenerate_triangles;
          continue;
        }
        data.mesh.triangles.push_back(t);
      }
    } else if (kw == "usemtl") {
      if (words.size() < 2) throw ObjError(line_no, "usemtl needs a name");
      std::string name(words[1]);
      if (seen_materials.insert(name).second) data.materials.push_back(std::move(name));
    }
  }
  if (data.mesh.vertices.size() > 0xFFFFFFFFull) throw ObjError(line_no, "too many vertices");
  return data;
}

ObjData load_obj(const std::filesystem::path& path) { return parse_obj(detail::read_file(path)); }

std::string write_obj(const TriangleMesh& mesh) {
  std::string out = "# " + std::to_string(mesh.vertices.size()) + " vertices, " +
                    std::to_string(mesh.triangles.size()) + " triangles\n";
  out.reserve(out.size() + mesh.vertices.size() * 40 + mesh.triangles.size() * 24);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    const int n = std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    out.append(buf, static_cast<std::size_t>(n));
  }
  for (const auto& t : mesh.triangles) {
    const int n = std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

void save_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  detail::write_file_atomic(path, write_obj(mesh));
}

}  // namespace meshforge
