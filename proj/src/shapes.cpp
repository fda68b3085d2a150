#include "posekit/shapes.hpp"

#include <cmath>
#include <map>

namespace posekit {

TriangleMesh make_box(const Vec3& size) {
  return make_subdivided_box(size, 1);
}

TriangleMesh make_subdivided_box(const Vec3& size, int n) {
  TriangleMesh mesh;
  const Vec3 half = 0.5 * size;
  // Each face: outward normal axis, two in-plane axes ordered so that
  // u x v points outward.
  struct Face {
    int axis;
    double sign;
    int u, v;
  };
  const Face faces[6] = {{0, 1, 1, 2}, {0, -1, 2, 1}, {1, 1, 2, 0},
                         {1, -1, 0, 2}, {2, 1, 0, 1}, {2, -1, 1, 0}};
  std::map<std::array<long, 3>, int> index;
  auto vertex = [&](const Vec3& p) {
    const std::array<long, 3> key{std::lround(p.x() * 1e9), std::lround(p.y() * 1e9),
                                  std::lround(p.z() * 1e9)};
    auto [it, inserted] = index.emplace(key, static_cast<int>(mesh.vertices.size()));
    if (inserted) mesh.vertices.push_back(p);
    return it->second;
  };
  for (const Face& f : faces) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        auto corner = [&](int a, int b) {
          Vec3 p;
          p[f.axis] = f.sign * half[f.axis];
          p[f.u] = -half[f.u] + size[f.u] * a / n;
          p[f.v] = -half[f.v] + size[f.v] * b / n;
          return vertex(p);
        };
        const int v00 = corner(i, j), v10 = corner(i + 1, j), v11 = corner(i + 1, j + 1),
                  v01 = corner(i, j + 1);
        mesh.triangles.push_back({v00, v10, v11});
        mesh.triangles.push_back({v00, v11, v01});
      }
    }
  }
  return mesh;
}

TriangleMesh make_icosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriangleMesh mesh;
  for (const auto& p : v) mesh.vertices.push_back(radius * p);
  mesh.triangles = std::move(f);
  return mesh;
}

TriangleMesh make_square(double side) {
  const double h = 0.5 * side;
  TriangleMesh mesh;
  mesh.vertices = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

TriangleMesh transformed(const TriangleMesh& mesh, const Pose& p) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = p * v;
  return out;
}

}  // namespace posekit
