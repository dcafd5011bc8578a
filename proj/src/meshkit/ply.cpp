#include <sstream>

#include "binary_io.hpp"
#include "file_util.hpp"
#include "meshforge/meshkit.hpp"

namespace meshforge {

namespace {

void check_sizes(const PointSet& ps) {
  const std::size_t n = ps.points.size();
  if ((!ps.normals.empty() && ps.normals.size() != n) || (!ps.labels.empty() && ps.labels.size() != n) ||
      (!ps.displacements.empty() && ps.displacements.size() != n)) {
    throw std::invalid_argument("point set attribute arrays must match the point count");
  }
}

void write_vec(std::ostream& out, const Vec3& v) {
  detail::write_le<float>(out, static_cast<float>(v.x));
  detail::write_le<float>(out, static_cast<float>(v.y));
  detail::write_le<float>(out, static_cast<float>(v.z));
}

Vec3 read_vec(std::istream& in) {
  Vec3 v;
  v.x = detail::read_le<float>(in, "vertex property");
  v.y = detail::read_le<float>(in, "vertex property");
  v.z = detail::read_le<float>(in, "vertex property");
  return v;
}

}  // namespace

std::string write_ply(const PointSet& ps) {
  check_sizes(ps);
  std::ostringstream out(std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << ps.points.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (!ps.normals.empty()) out << "property float nx\nproperty float ny\nproperty float nz\n";
  if (!ps.labels.empty()) out << "property uchar label\n";
  if (!ps.displacements.empty()) out << "property float dx\nproperty float dy\nproperty float dz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < ps.points.size(); ++i) {
    write_vec(out, ps.points[i]);
    if (!ps.normals.empty()) write_vec(out, ps.normals[i]);
    if (!ps.labels.empty()) detail::write_le<std::uint8_t>(out, ps.labels[i]);
    if (!ps.displacements.empty()) write_vec(out, ps.displacements[i]);
  }
  return std::move(out).str();
}

PointSet parse_ply(std::string_view bytes) {
  std::istringstream in{std::string(bytes), std::ios::binary};
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw std::runtime_error("ply: truncated header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  next_line();
  if (line != "ply") throw std::runtime_error("ply: missing magic");
  std::size_t count = 0;
  bool have_vertex = false;
  std::vector<std::string> props;
  while (true) {
    next_line();
    std::istringstream words(line);
    std::string kw;
    words >> kw;
    if (kw == "end_header") break;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string fmt;
      std::string version;
      words >> fmt >> version;
      if (fmt != "binary_little_endian" || version != "1.0") {
        throw std::runtime_error("ply: only binary_little_endian 1.0 is supported");
      }
    } else if (kw == "element") {
      std::string name;
      words >> name >> count;
      if (name != "vertex" || have_vertex || !words) throw std::runtime_error("ply: expected one vertex element");
      have_vertex = true;
    } else if (kw == "property") {
      std::string type;
      std::string name;
      words >> type >> name;
      const bool is_label = name == "label";
      if (!have_vertex || (is_label ? type != "uchar" : type != "float")) {
        throw std::runtime_error("ply: unsupported property '" + line + "'");
      }
      props.push_back(name);
    } else {
      throw std::runtime_error("ply: unexpected header line '" + line + "'");
    }
  }
  const std::vector<std::vector<std::string>> layouts = {
      {"x", "y", "z"}, {"nx", "ny", "nz"}, {"label"}, {"dx", "dy", "dz"}};
  bool has[4] = {false, false, false, false};
  std::size_t p = 0;
  for (std::size_t g = 0; g < layouts.size() && p < props.size(); ++g) {
    if (props[p] != layouts[g][0]) continue;
    for (const auto& name : layouts[g]) {
      if (p >= props.size() || props[p] != name) throw std::runtime_error("ply: unexpected property order");
      ++p;
    }
    has[g] = true;
  }
  if (p != props.size() || !has[0]) throw std::runtime_error("ply: unsupported property layout");

  PointSet ps;
  for (std::size_t i = 0; i < count; ++i) {
    ps.points.push_back(read_vec(in));
    if (has[1]) ps.normals.push_back(read_vec(in));
    if (has[2]) ps.labels.push_back(detail::read_le<std::uint8_t>(in, "label"));
    if (has[3]) ps.displacements.push_back(read_vec(in));
  }
  return ps;
}

void save_ply(const std::filesystem::path& path, const PointSet& points) {
  detail::write_file_atomic(path, write_ply(points));
}

PointSet load_ply(const std::filesystem::path& path) { return parse_ply(detail::read_file(path)); }

}  // namespace meshforge
