#include "dvd/cloud_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dvd/errors.hpp"

namespace dvd::cloud {

namespace {

struct LineReader {
  std::istream& in;
  int line_no = 0;

  /// Next non-blank, non-comment line; false at EOF.
  bool next(std::string& out) {
    std::string s;
    while (std::getline(in, s)) {
      ++line_no;
      const auto first = s.find_first_not_of(" \t\r\n");
      if (first == std::string::npos) continue;
      if (s[first] == '#') continue;
      out = s;
      return true;
    }
    return false;
  }
};

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream iss(s);
  std::vector<std::string> out;
  std::string t;
  while (iss >> t) out.push_back(t);
  return out;
}

double parse_double(const std::string& t, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + t + "'", line_no);
  }
}

long parse_int(const std::string& t, int line_no) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(t, &pos);
    if (pos != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected an integer, got '" + t + "'", line_no);
  }
}

}  // namespace

TriangleMesh load_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  LineReader reader{in};

  std::string line;
  if (!reader.next(line)) throw ParseError("empty OFF file", reader.line_no);
  auto head = tokens(line);
  if (head.empty() || head[0] != "OFF") throw ParseError("missing OFF header", reader.line_no);

  long nv = -1, nf = -1;
  if (head.size() >= 3) {
    // Counts allowed on the header line.
    nv = parse_int(head[1], reader.line_no);
    nf = parse_int(head[2], reader.line_no);
  } else {
    if (!reader.next(line)) throw ParseError("missing counts line", reader.line_no);
    auto counts = tokens(line);
    if (counts.size() < 2) throw ParseError("counts line needs vertex and face counts", reader.line_no);
    nv = parse_int(counts[0], reader.line_no);
    nf = parse_int(counts[1], reader.line_no);
  }
  if (nv < 0 || nf < 0) throw ParseError("negative counts", reader.line_no);

  TriangleMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    if (!reader.next(line)) throw ParseError("unexpected end of file in vertex list", reader.line_no);
    auto tk = tokens(line);
    if (tk.size() < 3) throw ParseError("vertex line needs 3 coordinates", reader.line_no);
    mesh.vertices.emplace_back(parse_double(tk[0], reader.line_no),
                               parse_double(tk[1], reader.line_no),
                               parse_double(tk[2], reader.line_no));
  }
  mesh.faces.reserve(static_cast<std::size_t>(nf));
  for (long i = 0; i < nf; ++i) {
    if (!reader.next(line)) throw ParseError("unexpected end of file in face list", reader.line_no);
    auto tk = tokens(line);
    if (tk.empty()) throw ParseError("empty face line", reader.line_no);
    const long arity = parse_int(tk[0], reader.line_no);
    if (arity != 3) throw ParseError("only triangle faces are supported", reader.line_no);
    if (tk.size() < 4) throw ParseError("face line needs 3 indices", reader.line_no);
    std::array<int, 3> f;
    for (int j = 0; j < 3; ++j) {
      const long idx = parse_int(tk[static_cast<std::size_t>(j) + 1], reader.line_no);
      if (idx < 0 || idx >= nv) throw ParseError("vertex index out of range", reader.line_no);
      f[static_cast<std::size_t>(j)] = static_cast<int>(idx);
    }
    mesh.faces.push_back(f);
  }
  return mesh;
}

PointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  LineReader reader{in};

  std::string line;
  if (!reader.next(line) || tokens(line) != std::vector<std::string>{"ply"})
    throw ParseError("missing ply magic", reader.line_no);
  if (!reader.next(line)) throw ParseError("truncated header", reader.line_no);
  {
    auto tk = tokens(line);
    if (tk.size() != 3 || tk[0] != "format" || tk[1] != "ascii")
      throw ParseError("only 'format ascii 1.0' is supported", reader.line_no);
  }

  long vertex_count = -1;
  std::vector<std::string> vertex_props;
  bool in_vertex_element = false;
  while (true) {
    if (!reader.next(line)) throw ParseError("header missing end_header", reader.line_no);
    auto tk = tokens(line);
    if (tk.empty()) continue;
    if (tk[0] == "end_header") break;
    if (tk[0] == "comment") continue;
    if (tk[0] == "element") {
      if (tk.size() < 3) throw ParseError("malformed element line", reader.line_no);
      in_vertex_element = (tk[1] == "vertex");
      if (in_vertex_element) vertex_count = parse_int(tk[2], reader.line_no);
    } else if (tk[0] == "property") {
      if (in_vertex_element) {
        if (tk.size() < 3) throw ParseError("malformed property line", reader.line_no);
        vertex_props.push_back(tk.back());
      }
    } else {
      throw ParseError("unsupported header line '" + tk[0] + "'", reader.line_no);
    }
  }
  if (vertex_count < 0) throw ParseError("no vertex element declared", reader.line_no);

  auto prop_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < vertex_props.size(); ++i)
      if (vertex_props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = prop_index("x"), iy = prop_index("y"), iz = prop_index("z");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z", reader.line_no);
  const int inx = prop_index("nx"), iny = prop_index("ny"), inz = prop_index("nz");
  const int normal_flags = (inx >= 0) + (iny >= 0) + (inz >= 0);
  if (normal_flags != 0 && normal_flags != 3)
    throw ParseError("vertex normals must declare all of nx ny nz", reader.line_no);
  const bool with_normals = normal_flags == 3;

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(vertex_count));
  if (with_normals) cloud.normals.reserve(static_cast<std::size_t>(vertex_count));
  for (long i = 0; i < vertex_count; ++i) {
    if (!reader.next(line)) throw ParseError("unexpected end of file in vertex data", reader.line_no);
    auto tk = tokens(line);
    if (tk.size() < vertex_props.size())
      throw ParseError("vertex line has too few values", reader.line_no);
    auto get = [&](int idx) { return parse_double(tk[static_cast<std::size_t>(idx)], reader.line_no); };
    cloud.points.emplace_back(get(ix), get(iy), get(iz));
    if (with_normals) cloud.normals.emplace_back(get(inx), get(iny), get(inz));
  }
  if (cloud.empty()) throw ParseError("point cloud is empty", reader.line_no);
  return cloud;
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals())
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  char buf[224];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    if (cloud.has_normals()) {
      const auto& n = cloud.normals[i];
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g\n", p.x(), p.y(), p.z(),
                    n.x(), n.y(), n.z());
    } else {
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    }
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace dvd::cloud
