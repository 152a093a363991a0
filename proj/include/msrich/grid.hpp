#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace msrich {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Uniform triangulation of the unit square: n x n cells, each split along the
// lower-left to upper-right diagonal. Nodes are ordered row-major, y outer and
// x inner, so node(ix, iy) = iy*(n+1) + ix. Triangle vertices are listed
// counterclockwise. Characteristic length h is the diagonal edge sqrt(2)/n.
struct FineGrid {
  int n = 0;
  double h = 0.0;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> tris;
  std::vector<char> on_boundary;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_tris() const { return static_cast<int>(tris.size()); }
  int node_index(int ix, int iy) const { return iy * (n + 1) + ix; }
};

struct CoarseGrid {
  int n = 0;
  double H = 0.0;
  int cells_per_block = 0;  // fine cells along one block side
  std::vector<Point> vertices;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_blocks() const { return n * n; }
  int vertex_index(int vx, int vy) const { return vy * (n + 1) + vx; }
  int block_index(int bx, int by) const { return by * n + bx; }
};

// Neighborhood omega_j of a coarse vertex: the union of the 1, 2 or 4 blocks
// sharing that vertex. Always a rectangle of fine cells. Fine nodes of the
// closure are kept sorted by global index; the canonical patch is the
// (2k+1) x (2k+1) window centered at the vertex (k = cells_per_block),
// row-major y-then-x, with slots outside the domain mapped to -1.
struct Neighborhood {
  int vertex = -1;
  std::vector<int> blocks;
  std::vector<int> nodes;           // sorted global fine-node indices
  std::vector<int> boundary_nodes;  // subset of nodes on the patch boundary
  std::vector<char> node_is_interior;
  std::vector<int> interior_nodes;  // subset of nodes strictly inside
  std::vector<int> tri_indices;     // global fine-triangle indices inside omega_j
  int patch_side = 0;
  std::vector<int> patch_to_local;  // patch slot -> local node index or -1

  int n_local() const { return static_cast<int>(nodes.size()); }
  int n_interior() const { return static_cast<int>(interior_nodes.size()); }
  int m() const { return patch_side * patch_side; }
  // Local index of a global node, or -1 when the node is outside the patch.
  int local_index(int global_node) const;
};

// Validates divisibility and the minimum refinement (at least 2 fine cells per
// block side), then builds both grids.
std::pair<FineGrid, CoarseGrid> build_grids(int fine_n, int coarse_n);

FineGrid make_fine_grid(int n);

Neighborhood make_neighborhood(const FineGrid& fine, const CoarseGrid& coarse, int vertex);

std::vector<Neighborhood> make_all_neighborhoods(const FineGrid& fine, const CoarseGrid& coarse);

// Canonical patch embedding: local nodal values -> fixed-length m-vector with
// zeros in out-of-domain slots. extract_patch is its inverse on the local part.
std::vector<double> embed_patch(const Neighborhood& nb, std::span<const double> local_values);
std::vector<double> extract_patch(const Neighborhood& nb, std::span<const double> patch_values);

}  // namespace msrich
