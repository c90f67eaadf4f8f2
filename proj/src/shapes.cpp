#include "dvd/shapes.hpp"

#include <cmath>
#include <map>
#include <random>

#include "dvd/errors.hpp"
#include "dvd/rng.hpp"

namespace dvd::cloud {

namespace {
constexpr double kPi = 3.14159265358979323846;

void add_quad(TriangleMesh& mesh, int a, int b, int c, int d) {
  mesh.faces.push_back({a, b, c});
  mesh.faces.push_back({a, c, d});
}
}  // namespace

TriangleMesh make_box(const Vector3d& extents) {
  const Vector3d h = extents / 2.0;
  TriangleMesh mesh;
  for (int zi = 0; zi < 2; ++zi)
    for (int yi = 0; yi < 2; ++yi)
      for (int xi = 0; xi < 2; ++xi)
        mesh.vertices.emplace_back((xi ? h.x() : -h.x()), (yi ? h.y() : -h.y()),
                                   (zi ? h.z() : -h.z()));
  add_quad(mesh, 0, 2, 3, 1);  // z-
  add_quad(mesh, 4, 5, 7, 6);  // z+
  add_quad(mesh, 0, 1, 5, 4);  // y-
  add_quad(mesh, 2, 6, 7, 3);  // y+
  add_quad(mesh, 0, 4, 6, 2);  // x-
  add_quad(mesh, 1, 3, 7, 5);  // x+
  return mesh;
}

TriangleMesh make_icosphere(int subdivisions, double radius) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                   {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                   {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : mesh.vertices) v.normalize();
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vector3d m = (mesh.vertices[static_cast<std::size_t>(a)] +
                    mesh.vertices[static_cast<std::size_t>(b)]) /
                   2.0;
      m.normalize();
      mesh.vertices.push_back(m);
      const int idx = static_cast<int>(mesh.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(mesh.faces.size() * 4);
    for (const auto& [a, b, c] : mesh.faces) {
      const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      faces.push_back({a, ab, ca});
      faces.push_back({b, bc, ab});
      faces.push_back({c, ca, bc});
      faces.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(faces);
  }
  for (auto& v : mesh.vertices) v *= radius;
  return mesh;
}

TriangleMesh make_cylinder(double radius, double height, int segments, int height_rings) {
  if (segments < 3 || height_rings < 1) throw InvalidInput("make_cylinder: bad resolution");
  TriangleMesh mesh;
  // Lateral grid of (height_rings+1) rings.
  for (int r = 0; r <= height_rings; ++r) {
    const double z = height * (static_cast<double>(r) / height_rings - 0.5);
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * kPi * s / segments;
      mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
    }
  }
  for (int r = 0; r < height_rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int s1 = (s + 1) % segments;
      const int a = r * segments + s;
      const int b = r * segments + s1;
      const int c = (r + 1) * segments + s1;
      const int d = (r + 1) * segments + s;
      add_quad(mesh, a, b, c, d);
    }
  }
  // Caps.
  const int bottom_center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0, 0, -height / 2.0);
  const int top_center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0, 0, height / 2.0);
  for (int s = 0; s < segments; ++s) {
    const int s1 = (s + 1) % segments;
    mesh.faces.push_back({bottom_center, s1, s});
    const int off = height_rings * segments;
    mesh.faces.push_back({top_center, off + s, off + s1});
  }
  return mesh;
}

TriangleMesh make_torus(double major_radius, double minor_radius, int major_segments,
                        int minor_segments) {
  if (major_segments < 3 || minor_segments < 3) throw InvalidInput("make_torus: bad resolution");
  TriangleMesh mesh;
  for (int i = 0; i < major_segments; ++i) {
    const double u = 2.0 * kPi * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const double v = 2.0 * kPi * j / minor_segments;
      const double r = major_radius + minor_radius * std::cos(v);
      mesh.vertices.emplace_back(r * std::cos(u), r * std::sin(u), minor_radius * std::sin(v));
    }
  }
  for (int i = 0; i < major_segments; ++i) {
    const int i1 = (i + 1) % major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const int j1 = (j + 1) % minor_segments;
      add_quad(mesh, i * minor_segments + j, i1 * minor_segments + j, i1 * minor_segments + j1,
               i * minor_segments + j1);
    }
  }
  return mesh;
}

TriangleMesh make_blob(std::uint64_t seed, int subdivisions) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  struct Bump {
    Vector3d dir;
    double amplitude, frequency, phase;
  };
  const int bump_count = 4 + static_cast<int>(uni(rng) * 4.0);  // 4..7
  std::vector<Bump> bumps;
  bumps.reserve(static_cast<std::size_t>(bump_count));
  for (int i = 0; i < bump_count; ++i) {
    Vector3d d(gauss(rng), gauss(rng), gauss(rng));
    while (d.norm() < 1e-9) d = Vector3d(gauss(rng), gauss(rng), gauss(rng));
    d.normalize();
    bumps.push_back({d, 0.04 + 0.10 * uni(rng), 1.5 + 4.0 * uni(rng), 2.0 * kPi * uni(rng)});
  }
  const Vector3d scale(0.7 + 0.6 * uni(rng), 0.7 + 0.6 * uni(rng), 0.7 + 0.6 * uni(rng));

  TriangleMesh mesh = make_icosphere(subdivisions);
  for (auto& v : mesh.vertices) {
    const Vector3d dir = v;  // unit
    double r = 1.0;
    for (const auto& b : bumps) r += b.amplitude * std::sin(b.frequency * dir.dot(b.dir) + b.phase);
    v = (r * dir).cwiseProduct(scale);
  }
  return mesh;
}

TriangleMesh make_shape(const std::string& generator, std::uint64_t seed) {
  auto rng = make_rng(splitmix64(seed));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (generator == "sphere") return make_icosphere(3, 0.8 + 0.4 * uni(rng));
  if (generator == "box")
    return make_box(Vector3d(0.6 + 0.9 * uni(rng), 0.6 + 0.9 * uni(rng), 0.6 + 0.9 * uni(rng)));
  if (generator == "cylinder") return make_cylinder(0.3 + 0.4 * uni(rng), 1.0 + uni(rng), 48);
  if (generator == "torus") return make_torus(0.7 + 0.3 * uni(rng), 0.15 + 0.2 * uni(rng), 48, 24);
  if (generator == "blob") return make_blob(seed);
  throw InvalidInput("make_shape: unknown generator '" + generator + "'");
}

PointCloud cylinder_shell_grid(double radius, double height, int rings, int segments) {
  if (rings < 1 || segments < 3) throw InvalidInput("cylinder_shell_grid: bad resolution");
  PointCloud out;
  out.points.reserve(static_cast<std::size_t>(rings) * static_cast<std::size_t>(segments));
  for (int r = 0; r < rings; ++r) {
    const double z = rings == 1 ? 0.0 : height * (static_cast<double>(r) / (rings - 1) - 0.5);
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * kPi * s / segments;
      out.points.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
    }
  }
  return out;
}

}  // namespace dvd::cloud
