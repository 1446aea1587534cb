#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace uq {

enum class BoundaryTag : std::uint8_t { Interior, Bottom, Top, Left, Right };

/// Uniform right-triangle mesh of the unit square: m x m nodes,
/// 2 (m-1)^2 triangles, every cell split along the (+1,+1) diagonal,
/// counterclockwise orientation.
struct TriMesh {
  int m = 0;       // nodes per side
  double h = 0.0;  // spacing 1/(m-1)
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryTag> tag;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int node_id(int i, int j) const { return i * m + j; }  // i = row (x2), j = col (x1)
  bool is_dirichlet(int node) const { return tag[node] != BoundaryTag::Interior; }
};

TriMesh build_mesh(int m);

}  // namespace uq
