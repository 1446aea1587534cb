#include "uq/mesh.hpp"

#include <stdexcept>

namespace uq {

TriMesh build_mesh(int m) {
  if (m < 3) throw std::invalid_argument("build_mesh: m must be >= 3");
  TriMesh mesh;
  mesh.m = m;
  mesh.h = 1.0 / (m - 1);
  mesh.nodes.reserve(static_cast<std::size_t>(m) * m);
  mesh.tag.reserve(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      mesh.nodes.emplace_back(j * mesh.h, i * mesh.h);
      BoundaryTag t = BoundaryTag::Interior;
      // corner priority: top > bottom > left > right
      if (i == m - 1)
        t = BoundaryTag::Top;
      else if (i == 0)
        t = BoundaryTag::Bottom;
      else if (j == 0)
        t = BoundaryTag::Left;
      else if (j == m - 1)
        t = BoundaryTag::Right;
      mesh.tag.push_back(t);
    }
  }
  mesh.triangles.reserve(2u * (m - 1) * (m - 1));
  for (int i = 0; i < m - 1; ++i) {
    for (int j = 0; j < m - 1; ++j) {
      const int v00 = mesh.node_id(i, j);
      const int v10 = mesh.node_id(i, j + 1);
      const int v01 = mesh.node_id(i + 1, j);
      const int v11 = mesh.node_id(i + 1, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  return mesh;
}

}  // namespace uq
