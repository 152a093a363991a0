#pragma once

#include <optional>
#include <span>
#include <vector>

#include "msrich/grid.hpp"
#include "msrich/picard.hpp"
#include "msrich/pou.hpp"
#include "msrich/sparse.hpp"

namespace msrich {

// Conductivity-harmonic extensions of boundary Kronecker deltas on one
// neighborhood. Column k extends the unit value at nb.boundary_nodes[k];
// storage is column-major over local node indices.
struct SnapshotSpace {
  int vertex = -1;
  int n_local = 0;
  int n_snap = 0;
  std::vector<double> vectors;

  double at(int local_node, int snap) const { return vectors[snap * n_local + local_node]; }
};

SnapshotSpace snapshot_space(const FineGrid& fine, const Neighborhood& nb,
                             std::span<const double> cond);

// Leading eigenpairs of the local spectral problem A psi = lambda S psi,
// projected on the snapshot span. Vectors hold nodal values on the
// neighborhood (before partition-of-unity multiplication), S-orthonormal,
// eigenvalues ascending.
struct SpectralBasis {
  int vertex = -1;
  int n_local = 0;
  int n_snap = 0;
  int n_basis = 0;
  std::vector<double> eigenvalues;
  std::vector<double> vectors;  // n_local x n_basis column-major
  std::vector<double> coeffs;   // n_snap x n_basis column-major snapshot coordinates
  bool regularized = false;     // ridge added to the projected mass

  double at(int local_node, int k) const { return vectors[k * n_local + local_node]; }
};

SpectralBasis spectral_basis(const FineGrid& fine, const Neighborhood& nb,
                             const SnapshotSpace& snap, const PartitionOfUnity& pou,
                             std::span<const double> cond, int n_basis);

// Downscaling operator stored column by column: each column is a fine-node
// sparse vector with sorted row indices, tagged by its owning coarse vertex.
struct BasisColumns {
  int n_rows = 0;
  std::vector<int> owner;
  std::vector<std::vector<int>> rows;
  std::vector<std::vector<double>> vals;

  int n_cols() const { return static_cast<int>(rows.size()); }
  void append(int owner_vertex, std::vector<int> row_ids, std::vector<double> values);
  std::vector<double> apply(std::span<const double> coarse_coeff) const;
  std::vector<double> apply_transpose(std::span<const double> fine_vec) const;
};

// Fails with a numeric error naming the first dependent column (and its
// vertex) when the Gram matrix of the columns is not numerically positive
// definite. coarse_solve runs this diagnostic whenever its projected system
// turns out indefinite, so callers rarely need it directly.
void check_full_rank(const BasisColumns& R);

struct OfflineSpace {
  int n_basis = 0;
  std::vector<SpectralBasis> local;  // one per coarse vertex
  BasisColumns R;
};

// Multiplies each local eigenvector by its partition-of-unity function,
// zeroes domain-boundary nodes and lays the columns out vertex-major.
OfflineSpace assemble_offline_space(const FineGrid& fine,
                                    const std::vector<Neighborhood>& nbs,
                                    const PartitionOfUnity& pou,
                                    std::vector<SpectralBasis> local);

// Snapshot + spectral + assembly over all neighborhoods at a fixed
// conductivity state.
OfflineSpace build_offline_space(const FineGrid& fine, const std::vector<Neighborhood>& nbs,
                                 const PartitionOfUnity& pou, std::span<const double> cond,
                                 int n_basis);

struct CoarseSolveResult {
  std::vector<double> coarse;
  std::vector<double> fine_rep;
};

// Galerkin solve in the space spanned by R. A and b must be the fine system
// with boundary conditions already applied (the same operators the fine
// solver would use). For a time step, pass the mass matrix with constrained
// rows/columns zeroed (zero_constrained), the previous coarse coefficients
// and tau; the coarse system becomes (M_c/tau + A_c) p = M_c p_prev/tau + b_c.
CoarseSolveResult coarse_solve(const BasisColumns& R, const CsrMatrix& A,
                               std::span<const double> b, const CsrMatrix* M,
                               const double* p_prev_coarse, std::optional<double> tau);

struct CoarsePicardResult {
  std::vector<double> coarse;
  std::vector<double> fine_rep;
  int iterations = 0;
  double final_rel_change = 0.0;
  bool converged = false;
  std::vector<std::vector<double>> fine_iterates;
};

// Picard loop run entirely in the span of R: linearize at the fine-grid
// representation, reassemble, project, solve coarse. Same stopping rule as
// the fine solver, measured on fine representations.
CoarsePicardResult coarse_picard_solve(const FineGrid& fine, const BasisColumns& R,
                                       std::span<const double> kappa,
                                       std::span<const double> f_nodes,
                                       const double* p_prev_coarse, std::optional<double> tau,
                                       const PicardConfig& cfg);

}  // namespace msrich
