#include "msrich/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msrich/errors.hpp"

namespace msrich {

FineGrid make_fine_grid(int n) {
  if (n < 1) throw ConfigError("fine grid size must be positive, got " + std::to_string(n));
  FineGrid g;
  g.n = n;
  g.h = std::sqrt(2.0) / n;
  const int nn = n + 1;
  g.nodes.resize(static_cast<std::size_t>(nn) * nn);
  g.on_boundary.assign(g.nodes.size(), 0);
  for (int iy = 0; iy < nn; ++iy) {
    for (int ix = 0; ix < nn; ++ix) {
      const int id = g.node_index(ix, iy);
      g.nodes[id] = {static_cast<double>(ix) / n, static_cast<double>(iy) / n};
      if (ix == 0 || ix == n || iy == 0 || iy == n) g.on_boundary[id] = 1;
    }
  }
  g.tris.reserve(static_cast<std::size_t>(2) * n * n);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const int ll = g.node_index(ix, iy);
      const int lr = g.node_index(ix + 1, iy);
      const int ul = g.node_index(ix, iy + 1);
      const int ur = g.node_index(ix + 1, iy + 1);
      g.tris.push_back({ll, lr, ur});
      g.tris.push_back({ll, ur, ul});
    }
  }
  return g;
}

std::pair<FineGrid, CoarseGrid> build_grids(int fine_n, int coarse_n) {
  if (fine_n < 1 || coarse_n < 1) {
    throw ConfigError("grid sizes must be positive, got fine " + std::to_string(fine_n) +
                      ", coarse " + std::to_string(coarse_n));
  }
  if (fine_n % coarse_n != 0) {
    throw ConfigError("fine grid size " + std::to_string(fine_n) +
                      " is not divisible by coarse grid size " + std::to_string(coarse_n));
  }
  const int k = fine_n / coarse_n;
  if (k < 2) {
    throw ConfigError("need at least 2 fine cells per coarse block side, got " +
                      std::to_string(k) + " from fine " + std::to_string(fine_n) +
                      " / coarse " + std::to_string(coarse_n));
  }
  CoarseGrid c;
  c.n = coarse_n;
  c.H = 1.0 / coarse_n;
  c.cells_per_block = k;
  const int nv = coarse_n + 1;
  c.vertices.resize(static_cast<std::size_t>(nv) * nv);
  for (int vy = 0; vy < nv; ++vy) {
    for (int vx = 0; vx < nv; ++vx) {
      c.vertices[c.vertex_index(vx, vy)] = {static_cast<double>(vx) / coarse_n,
                                            static_cast<double>(vy) / coarse_n};
    }
  }
  return {make_fine_grid(fine_n), std::move(c)};
}

int Neighborhood::local_index(int global_node) const {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), global_node);
  if (it == nodes.end() || *it != global_node) return -1;
  return static_cast<int>(it - nodes.begin());
}

Neighborhood make_neighborhood(const FineGrid& fine, const CoarseGrid& coarse, int vertex) {
  if (vertex < 0 || vertex >= coarse.n_vertices()) {
    throw std::out_of_range("coarse vertex " + std::to_string(vertex) + " outside [0, " +
                            std::to_string(coarse.n_vertices()) + ")");
  }
  const int nv = coarse.n + 1;
  const int vx = vertex % nv;
  const int vy = vertex / nv;
  const int k = coarse.cells_per_block;

  Neighborhood nb;
  nb.vertex = vertex;
  for (int by = vy - 1; by <= vy; ++by) {
    for (int bx = vx - 1; bx <= vx; ++bx) {
      if (bx >= 0 && bx < coarse.n && by >= 0 && by < coarse.n) {
        nb.blocks.push_back(coarse.block_index(bx, by));
      }
    }
  }

  // The covered fine-cell rectangle [cx0, cx1) x [cy0, cy1).
  const int cx0 = std::max(vx - 1, 0) * k;
  const int cx1 = std::min(vx, coarse.n - 1) * k + k;
  const int cy0 = std::max(vy - 1, 0) * k;
  const int cy1 = std::min(vy, coarse.n - 1) * k + k;

  for (int iy = cy0; iy <= cy1; ++iy) {
    for (int ix = cx0; ix <= cx1; ++ix) {
      nb.nodes.push_back(fine.node_index(ix, iy));
    }
  }
  std::sort(nb.nodes.begin(), nb.nodes.end());

  nb.node_is_interior.assign(nb.nodes.size(), 0);
  for (std::size_t i = 0; i < nb.nodes.size(); ++i) {
    const int id = nb.nodes[i];
    const int ix = id % (fine.n + 1);
    const int iy = id / (fine.n + 1);
    const bool on_patch_boundary = (ix == cx0 || ix == cx1 || iy == cy0 || iy == cy1);
    if (on_patch_boundary) {
      nb.boundary_nodes.push_back(id);
    } else {
      nb.node_is_interior[i] = 1;
      nb.interior_nodes.push_back(id);
    }
  }

  for (int iy = cy0; iy < cy1; ++iy) {
    for (int ix = cx0; ix < cx1; ++ix) {
      const int cell = iy * fine.n + ix;
      nb.tri_indices.push_back(2 * cell);
      nb.tri_indices.push_back(2 * cell + 1);
    }
  }

  nb.patch_side = 2 * k + 1;
  nb.patch_to_local.assign(static_cast<std::size_t>(nb.patch_side) * nb.patch_side, -1);
  const int ox = vx * k - k;  // patch origin in fine-node coordinates
  const int oy = vy * k - k;
  for (int py = 0; py < nb.patch_side; ++py) {
    for (int px = 0; px < nb.patch_side; ++px) {
      const int ix = ox + px;
      const int iy = oy + py;
      if (ix < 0 || ix > fine.n || iy < 0 || iy > fine.n) continue;
      if (ix < cx0 || ix > cx1 || iy < cy0 || iy > cy1) continue;
      nb.patch_to_local[py * nb.patch_side + px] = nb.local_index(fine.node_index(ix, iy));
    }
  }
  return nb;
}

std::vector<Neighborhood> make_all_neighborhoods(const FineGrid& fine, const CoarseGrid& coarse) {
  std::vector<Neighborhood> out;
  out.reserve(coarse.n_vertices());
  for (int j = 0; j < coarse.n_vertices(); ++j) out.push_back(make_neighborhood(fine, coarse, j));
  return out;
}

std::vector<double> embed_patch(const Neighborhood& nb, std::span<const double> local_values) {
  if (static_cast<int>(local_values.size()) != nb.n_local()) {
    throw DimensionError("patch embedding expects " + std::to_string(nb.n_local()) +
                         " local values, got " + std::to_string(local_values.size()));
  }
  std::vector<double> out(nb.m(), 0.0);
  for (int s = 0; s < nb.m(); ++s) {
    const int loc = nb.patch_to_local[s];
    if (loc >= 0) out[s] = local_values[loc];
  }
  return out;
}

std::vector<double> extract_patch(const Neighborhood& nb, std::span<const double> patch_values) {
  if (static_cast<int>(patch_values.size()) != nb.m()) {
    throw DimensionError("patch extraction expects " + std::to_string(nb.m()) +
                         " slots, got " + std::to_string(patch_values.size()));
  }
  std::vector<double> out(nb.n_local(), 0.0);
  for (int s = 0; s < nb.m(); ++s) {
    const int loc = nb.patch_to_local[s];
    if (loc >= 0) out[loc] = patch_values[s];
  }
  return out;
}

}  // namespace msrich
