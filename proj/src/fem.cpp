#include "msrich/fem.hpp"

#include <array>
#include <string>

#include "msrich/errors.hpp"

namespace msrich {

namespace {

struct TriGeometry {
  double area;
  std::array<Grad2, 3> grad;  // gradients of the three vertex hat functions
};

TriGeometry tri_geometry(const FineGrid& fine, int tri) {
  const auto& t = fine.tris[tri];
  const Point& a = fine.nodes[t[0]];
  const Point& b = fine.nodes[t[1]];
  const Point& c = fine.nodes[t[2]];
  const double twice_area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  TriGeometry g;
  g.area = 0.5 * twice_area;
  g.grad[0] = {(b.y - c.y) / twice_area, (c.x - b.x) / twice_area};
  g.grad[1] = {(c.y - a.y) / twice_area, (a.x - c.x) / twice_area};
  g.grad[2] = {(a.y - b.y) / twice_area, (b.x - a.x) / twice_area};
  return g;
}

void check_nodal_length(const FineGrid& fine, std::size_t got, const char* what) {
  if (static_cast<int>(got) != fine.n_nodes()) {
    throw DimensionError(std::string(what) + " has length " + std::to_string(got) +
                         ", expected " + std::to_string(fine.n_nodes()) + " nodes");
  }
}

constexpr double kMassLocal[3][3] = {{2.0, 1.0, 1.0}, {1.0, 2.0, 1.0}, {1.0, 1.0, 2.0}};

}  // namespace

Grad2 tri_gradient(const FineGrid& fine, int tri, const double* nodal_global) {
  const TriGeometry g = tri_geometry(fine, tri);
  const auto& t = fine.tris[tri];
  Grad2 out;
  for (int a = 0; a < 3; ++a) {
    out.x += nodal_global[t[a]] * g.grad[a].x;
    out.y += nodal_global[t[a]] * g.grad[a].y;
  }
  return out;
}

CsrMatrix assemble_stiffness(const FineGrid& fine, std::span<const double> coeff_nodes) {
  check_nodal_length(fine, coeff_nodes.size(), "coefficient");
  CooBuilder builder(fine.n_nodes());
  for (int tri = 0; tri < fine.n_tris(); ++tri) {
    const TriGeometry g = tri_geometry(fine, tri);
    const auto& t = fine.tris[tri];
    const double coeff = (coeff_nodes[t[0]] + coeff_nodes[t[1]] + coeff_nodes[t[2]]) / 3.0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double k = coeff * g.area * (g.grad[a].x * g.grad[b].x + g.grad[a].y * g.grad[b].y);
        builder.add(t[a], t[b], k);
      }
    }
  }
  return builder.compress();
}

CsrMatrix assemble_mass(const FineGrid& fine) {
  CooBuilder builder(fine.n_nodes());
  for (int tri = 0; tri < fine.n_tris(); ++tri) {
    const TriGeometry g = tri_geometry(fine, tri);
    const auto& t = fine.tris[tri];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        builder.add(t[a], t[b], g.area / 12.0 * kMassLocal[a][b]);
      }
    }
  }
  return builder.compress();
}

CsrMatrix assemble_weighted_mass(const FineGrid& fine, std::span<const double> tri_weight) {
  if (static_cast<int>(tri_weight.size()) != fine.n_tris()) {
    throw DimensionError("triangle weight has length " + std::to_string(tri_weight.size()) +
                         ", expected " + std::to_string(fine.n_tris()));
  }
  CooBuilder builder(fine.n_nodes());
  for (int tri = 0; tri < fine.n_tris(); ++tri) {
    const TriGeometry g = tri_geometry(fine, tri);
    const auto& t = fine.tris[tri];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        builder.add(t[a], t[b], tri_weight[tri] * g.area / 12.0 * kMassLocal[a][b]);
      }
    }
  }
  return builder.compress();
}

std::vector<double> assemble_load(const FineGrid& fine, const CsrMatrix& mass,
                                  std::span<const double> f_nodes) {
  check_nodal_length(fine, f_nodes.size(), "source");
  return mass.multiply(f_nodes);
}

namespace {

template <typename PerTriangle>
CsrMatrix assemble_local(const FineGrid& fine, const Neighborhood& nb, PerTriangle entry) {
  CooBuilder builder(nb.n_local());
  for (int tri : nb.tri_indices) {
    const TriGeometry g = tri_geometry(fine, tri);
    const auto& t = fine.tris[tri];
    std::array<int, 3> loc;
    for (int a = 0; a < 3; ++a) {
      loc[a] = nb.local_index(t[a]);
      if (loc[a] < 0) {
        throw std::out_of_range("triangle " + std::to_string(tri) +
                                " references node outside neighborhood of vertex " +
                                std::to_string(nb.vertex));
      }
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        builder.add(loc[a], loc[b], entry(tri, t, g, a, b));
      }
    }
  }
  return builder.compress();
}

}  // namespace

CsrMatrix assemble_local_stiffness(const FineGrid& fine, const Neighborhood& nb,
                                   std::span<const double> coeff_nodes) {
  check_nodal_length(fine, coeff_nodes.size(), "coefficient");
  return assemble_local(fine, nb,
                        [&](int, const std::array<int, 3>& t, const TriGeometry& g, int a, int b) {
                          const double coeff =
                              (coeff_nodes[t[0]] + coeff_nodes[t[1]] + coeff_nodes[t[2]]) / 3.0;
                          return coeff * g.area *
                                 (g.grad[a].x * g.grad[b].x + g.grad[a].y * g.grad[b].y);
                        });
}

CsrMatrix assemble_local_mass(const FineGrid& fine, const Neighborhood& nb) {
  return assemble_local(fine, nb,
                        [&](int, const std::array<int, 3>&, const TriGeometry& g, int a, int b) {
                          return g.area / 12.0 * kMassLocal[a][b];
                        });
}

CsrMatrix assemble_local_weighted_mass(const FineGrid& fine, const Neighborhood& nb,
                                       std::span<const double> tri_weight_global) {
  if (static_cast<int>(tri_weight_global.size()) != fine.n_tris()) {
    throw DimensionError("triangle weight has length " + std::to_string(tri_weight_global.size()) +
                         ", expected " + std::to_string(fine.n_tris()));
  }
  return assemble_local(fine, nb,
                        [&](int tri, const std::array<int, 3>&, const TriGeometry& g, int a, int b) {
                          return tri_weight_global[tri] * g.area / 12.0 * kMassLocal[a][b];
                        });
}

std::vector<double> assemble_local_load(const FineGrid& fine, const Neighborhood& nb,
                                        std::span<const double> f_nodes) {
  check_nodal_length(fine, f_nodes.size(), "source");
  std::vector<double> b(nb.n_local(), 0.0);
  for (int tri : nb.tri_indices) {
    const TriGeometry g = tri_geometry(fine, tri);
    const auto& t = fine.tris[tri];
    for (int a = 0; a < 3; ++a) {
      const int la = nb.local_index(t[a]);
      double acc = 0.0;
      for (int bb = 0; bb < 3; ++bb) acc += kMassLocal[a][bb] * f_nodes[t[bb]];
      b[la] += g.area / 12.0 * acc;
    }
  }
  return b;
}

}  // namespace msrich
