#pragma once

#include <span>
#include <vector>

#include "msrich/grid.hpp"
#include "msrich/sparse.hpp"

namespace msrich {

// P1 assembly on the uniform triangulation. The diffusion coefficient is
// nodal; each triangle uses the arithmetic mean of its three vertex values.

CsrMatrix assemble_stiffness(const FineGrid& fine, std::span<const double> coeff_nodes);

// Consistent mass matrix: per element (area/12) * [[2,1,1],[1,2,1],[1,1,2]].
CsrMatrix assemble_mass(const FineGrid& fine);

// Mass-type matrix with a piecewise-constant weight given per triangle.
CsrMatrix assemble_weighted_mass(const FineGrid& fine, std::span<const double> tri_weight);

// Load vector for a nodal source: b = M f.
std::vector<double> assemble_load(const FineGrid& fine, const CsrMatrix& mass,
                                  std::span<const double> f_nodes);

// P1 gradient of a local nodal field on one triangle.
struct Grad2 {
  double x = 0.0;
  double y = 0.0;
};
Grad2 tri_gradient(const FineGrid& fine, int tri, const double* nodal_global);

// Local assemblies on a neighborhood submesh, indexed by nb-local node ids.
// Nodal inputs are global-length vectors.
CsrMatrix assemble_local_stiffness(const FineGrid& fine, const Neighborhood& nb,
                                   std::span<const double> coeff_nodes);
CsrMatrix assemble_local_mass(const FineGrid& fine, const Neighborhood& nb);
CsrMatrix assemble_local_weighted_mass(const FineGrid& fine, const Neighborhood& nb,
                                       std::span<const double> tri_weight_global);
std::vector<double> assemble_local_load(const FineGrid& fine, const Neighborhood& nb,
                                        std::span<const double> f_nodes);

}  // namespace msrich
