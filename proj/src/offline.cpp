#include "msrich/offline.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "msrich/errors.hpp"
#include "msrich/fem.hpp"
#include "msrich/random_field.hpp"

namespace msrich {

namespace {

// Dense congruence R^T A R through one sparse multiply per column.
Eigen::MatrixXd project_to_coarse(const BasisColumns& R, const CsrMatrix& A) {
  const int nc = R.n_cols();
  Eigen::MatrixXd out(nc, nc);
  std::vector<double> x(R.n_rows, 0.0);
  std::vector<double> y(R.n_rows, 0.0);
  for (int i = 0; i < nc; ++i) {
    const auto& rows_i = R.rows[i];
    const auto& vals_i = R.vals[i];
    for (std::size_t s = 0; s < rows_i.size(); ++s) x[rows_i[s]] = vals_i[s];
    A.multiply(x, y);
    for (int j = 0; j < nc; ++j) {
      const auto& rows_j = R.rows[j];
      const auto& vals_j = R.vals[j];
      double dot = 0.0;
      for (std::size_t s = 0; s < rows_j.size(); ++s) dot += vals_j[s] * y[rows_j[s]];
      out(j, i) = dot;
    }
    for (int r : rows_i) x[r] = 0.0;
  }
  out = 0.5 * (out + out.transpose()).eval();
  return out;
}

}  // namespace

SnapshotSpace snapshot_space(const FineGrid& fine, const Neighborhood& nb,
                             std::span<const double> cond) {
  if (static_cast<int>(cond.size()) != fine.n_nodes()) {
    throw DimensionError("conductivity length " + std::to_string(cond.size()) +
                         " does not match " + std::to_string(fine.n_nodes()) + " nodes");
  }
  const CsrMatrix A = assemble_local_stiffness(fine, nb, cond);
  const int n_local = nb.n_local();
  const int ni = nb.n_interior();
  const int ns = static_cast<int>(nb.boundary_nodes.size());

  std::vector<int> slot(n_local, -1);
  int next = 0;
  for (int l = 0; l < n_local; ++l) {
    if (nb.node_is_interior[l]) slot[l] = next++;
  }

  Eigen::MatrixXd a_ii = Eigen::MatrixXd::Zero(ni, ni);
  for (int l = 0; l < n_local; ++l) {
    if (slot[l] < 0) continue;
    for (int q = A.row_ptr[l]; q < A.row_ptr[l + 1]; ++q) {
      if (slot[A.col[q]] >= 0) a_ii(slot[l], slot[A.col[q]]) = A.val[q];
    }
  }

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ni, ns);
  for (int k = 0; k < ns; ++k) {
    const int lb = nb.local_index(nb.boundary_nodes[k]);
    // Column lb of the symmetric local stiffness, read off row lb.
    for (int q = A.row_ptr[lb]; q < A.row_ptr[lb + 1]; ++q) {
      if (slot[A.col[q]] >= 0) rhs(slot[A.col[q]], k) = -A.val[q];
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(a_ii);
  if (llt.info() != Eigen::Success) {
    throw NumericError("snapshot space: interior factorization failed for vertex " +
                       std::to_string(nb.vertex));
  }
  const Eigen::MatrixXd interior = llt.solve(rhs);

  SnapshotSpace snap;
  snap.vertex = nb.vertex;
  snap.n_local = n_local;
  snap.n_snap = ns;
  snap.vectors.assign(static_cast<std::size_t>(n_local) * ns, 0.0);
  for (int k = 0; k < ns; ++k) {
    double* col = snap.vectors.data() + static_cast<std::size_t>(k) * n_local;
    col[nb.local_index(nb.boundary_nodes[k])] = 1.0;
    for (int l = 0; l < n_local; ++l) {
      if (slot[l] >= 0) col[l] = interior(slot[l], k);
    }
  }
  return snap;
}

SpectralBasis spectral_basis(const FineGrid& fine, const Neighborhood& nb,
                             const SnapshotSpace& snap, const PartitionOfUnity& pou,
                             std::span<const double> cond, int n_basis) {
  if (n_basis < 1 || n_basis > snap.n_snap) {
    throw ConfigError("basis count " + std::to_string(n_basis) + " outside [1, " +
                      std::to_string(snap.n_snap) + "] for vertex " + std::to_string(nb.vertex));
  }
  if (snap.n_local != nb.n_local()) {
    throw DimensionError("snapshot space does not match neighborhood: " +
                         std::to_string(snap.n_local) + " vs " + std::to_string(nb.n_local()));
  }

  // Spectral mass weight per triangle: conductivity (vertex mean, as in the
  // stiffness) times the partition-of-unity gradient sum.
  std::vector<double> w(fine.n_tris(), 0.0);
  for (int t : nb.tri_indices) {
    const auto& tri = fine.tris[t];
    const double mean = (cond[tri[0]] + cond[tri[1]] + cond[tri[2]]) / 3.0;
    w[t] = mean * pou.grad_sq_sum[t];
  }
  const CsrMatrix A = assemble_local_stiffness(fine, nb, cond);
  const CsrMatrix S = assemble_local_weighted_mass(fine, nb, w);

  const int n_local = snap.n_local;
  const int ns = snap.n_snap;
  Eigen::Map<const Eigen::MatrixXd> psi(snap.vectors.data(), n_local, ns);
  Eigen::MatrixXd ay(n_local, ns), sy(n_local, ns);
  for (int k = 0; k < ns; ++k) {
    std::span<const double> col(snap.vectors.data() + static_cast<std::size_t>(k) * n_local,
                                static_cast<std::size_t>(n_local));
    A.multiply(col, std::span<double>(ay.col(k).data(), static_cast<std::size_t>(n_local)));
    S.multiply(col, std::span<double>(sy.col(k).data(), static_cast<std::size_t>(n_local)));
  }
  Eigen::MatrixXd a_p = psi.transpose() * ay;
  Eigen::MatrixXd s_p = psi.transpose() * sy;
  a_p = 0.5 * (a_p + a_p.transpose()).eval();
  s_p = 0.5 * (s_p + s_p.transpose()).eval();

  SpectralBasis basis;
  basis.vertex = nb.vertex;
  basis.n_local = n_local;
  basis.n_snap = ns;
  basis.n_basis = n_basis;

  Eigen::LLT<Eigen::MatrixXd> llt(s_p);
  if (llt.info() != Eigen::Success) {
    const double ridge = 1e-12 * s_p.trace() / ns;
    s_p += ridge * Eigen::MatrixXd::Identity(ns, ns);
    basis.regularized = true;
    llt.compute(s_p);
    if (llt.info() != Eigen::Success) {
      throw NumericError("spectral problem: projected mass not positive definite for vertex " +
                         std::to_string(nb.vertex));
    }
  }
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd reduced =
      L.triangularView<Eigen::Lower>().solve(
          L.triangularView<Eigen::Lower>().solve(a_p).transpose().eval());
  reduced = 0.5 * (reduced + reduced.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
  if (es.info() != Eigen::Success) {
    throw NumericError("spectral problem: eigensolver failed for vertex " +
                       std::to_string(nb.vertex));
  }

  basis.eigenvalues.resize(n_basis);
  basis.vectors.assign(static_cast<std::size_t>(n_local) * n_basis, 0.0);
  basis.coeffs.assign(static_cast<std::size_t>(ns) * n_basis, 0.0);
  for (int k = 0; k < n_basis; ++k) {
    basis.eigenvalues[k] = es.eigenvalues()(k);
    const Eigen::VectorXd psi_hat =
        L.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors().col(k));
    Eigen::Map<Eigen::VectorXd>(basis.coeffs.data() + static_cast<std::size_t>(k) * ns, ns) =
        psi_hat;
    Eigen::Map<Eigen::VectorXd>(basis.vectors.data() + static_cast<std::size_t>(k) * n_local,
                                n_local) = psi * psi_hat;
  }
  return basis;
}

void BasisColumns::append(int owner_vertex, std::vector<int> row_ids,
                          std::vector<double> values) {
  if (row_ids.size() != values.size()) {
    throw DimensionError("column rows/values length mismatch: " + std::to_string(row_ids.size()) +
                         " vs " + std::to_string(values.size()));
  }
  owner.push_back(owner_vertex);
  rows.push_back(std::move(row_ids));
  vals.push_back(std::move(values));
}

std::vector<double> BasisColumns::apply(std::span<const double> coarse_coeff) const {
  if (static_cast<int>(coarse_coeff.size()) != n_cols()) {
    throw DimensionError("coarse coefficient length " + std::to_string(coarse_coeff.size()) +
                         " does not match " + std::to_string(n_cols()) + " columns");
  }
  std::vector<double> fine(n_rows, 0.0);
  for (int c = 0; c < n_cols(); ++c) {
    const double w = coarse_coeff[c];
    if (w == 0.0) continue;
    const auto& r = rows[c];
    const auto& v = vals[c];
    for (std::size_t s = 0; s < r.size(); ++s) fine[r[s]] += w * v[s];
  }
  return fine;
}

std::vector<double> BasisColumns::apply_transpose(std::span<const double> fine_vec) const {
  if (static_cast<int>(fine_vec.size()) != n_rows) {
    throw DimensionError("fine vector length " + std::to_string(fine_vec.size()) +
                         " does not match " + std::to_string(n_rows) + " rows");
  }
  std::vector<double> out(n_cols(), 0.0);
  for (int c = 0; c < n_cols(); ++c) {
    const auto& r = rows[c];
    const auto& v = vals[c];
    double dot = 0.0;
    for (std::size_t s = 0; s < r.size(); ++s) dot += v[s] * fine_vec[r[s]];
    out[c] = dot;
  }
  return out;
}

void check_full_rank(const BasisColumns& R) {
  const int nc = R.n_cols();
  if (nc == 0) throw NumericError("downscaling operator has no columns");

  Eigen::MatrixXd gram(nc, nc);
  std::vector<double> x(R.n_rows, 0.0);
  for (int i = 0; i < nc; ++i) {
    for (std::size_t s = 0; s < R.rows[i].size(); ++s) x[R.rows[i][s]] = R.vals[i][s];
    for (int j = 0; j < nc; ++j) {
      double dot = 0.0;
      for (std::size_t s = 0; s < R.rows[j].size(); ++s) dot += R.vals[j][s] * x[R.rows[j][s]];
      gram(j, i) = dot;
    }
    for (int r : R.rows[i]) x[r] = 0.0;
  }

  // Unpivoted incremental Cholesky: the first non-positive pivot names the
  // column that is numerically dependent on its predecessors.
  Eigen::MatrixXd fac = Eigen::MatrixXd::Zero(nc, nc);
  for (int c = 0; c < nc; ++c) {
    double d = gram(c, c);
    for (int k = 0; k < c; ++k) d -= fac(c, k) * fac(c, k);
    if (!(d > 1e-12 * gram(c, c))) {
      throw NumericError("downscaling operator rank deficient at column " + std::to_string(c) +
                         " (vertex " + std::to_string(R.owner[c]) + ")");
    }
    fac(c, c) = std::sqrt(d);
    for (int r = c + 1; r < nc; ++r) {
      double v = gram(r, c);
      for (int k = 0; k < c; ++k) v -= fac(r, k) * fac(c, k);
      fac(r, c) = v / fac(c, c);
    }
  }
}

OfflineSpace assemble_offline_space(const FineGrid& fine, const std::vector<Neighborhood>& nbs,
                                    const PartitionOfUnity& pou,
                                    std::vector<SpectralBasis> local) {
  if (local.size() != nbs.size() || pou.chi.size() != nbs.size()) {
    throw DimensionError("per-neighborhood inputs disagree: " + std::to_string(nbs.size()) +
                         " neighborhoods, " + std::to_string(local.size()) + " bases, " +
                         std::to_string(pou.chi.size()) + " partition functions");
  }
  OfflineSpace space;
  space.n_basis = local.empty() ? 0 : local.front().n_basis;
  space.R.n_rows = fine.n_nodes();
  for (std::size_t j = 0; j < nbs.size(); ++j) {
    const Neighborhood& nb = nbs[j];
    const SpectralBasis& sp = local[j];
    if (sp.n_basis != space.n_basis) {
      throw ConfigError("vertex " + std::to_string(nb.vertex) + " carries " +
                        std::to_string(sp.n_basis) + " bases, expected " +
                        std::to_string(space.n_basis));
    }
    const std::vector<double>& chi = pou.chi[nb.vertex];
    for (int k = 0; k < sp.n_basis; ++k) {
      std::vector<double> column(nb.nodes.size());
      for (int l = 0; l < nb.n_local(); ++l) {
        const int g = nb.nodes[l];
        column[l] = fine.on_boundary[g] ? 0.0 : chi[g] * sp.at(l, k);
      }
      space.R.append(nb.vertex, nb.nodes, std::move(column));
    }
  }
  space.local = std::move(local);
  return space;
}

OfflineSpace build_offline_space(const FineGrid& fine, const std::vector<Neighborhood>& nbs,
                                 const PartitionOfUnity& pou, std::span<const double> cond,
                                 int n_basis) {
  std::vector<SpectralBasis> local;
  local.reserve(nbs.size());
  for (const Neighborhood& nb : nbs) {
    const SnapshotSpace snap = snapshot_space(fine, nb, cond);
    local.push_back(spectral_basis(fine, nb, snap, pou, cond, n_basis));
  }
  return assemble_offline_space(fine, nbs, pou, std::move(local));
}

CoarseSolveResult coarse_solve(const BasisColumns& R, const CsrMatrix& A,
                               std::span<const double> b, const CsrMatrix* M,
                               const double* p_prev_coarse, std::optional<double> tau) {
  if (R.n_rows != A.n || static_cast<int>(b.size()) != A.n) {
    throw DimensionError("coarse solve: operator size " + std::to_string(A.n) +
                         " does not match basis rows " + std::to_string(R.n_rows));
  }
  if (tau && !(*tau > 0.0)) throw ConfigError("tau must be positive, got " + std::to_string(*tau));
  if (tau && M == nullptr) throw ConfigError("time step requested without a mass matrix");

  const int nc = R.n_cols();
  Eigen::MatrixXd system = project_to_coarse(R, A);
  std::vector<double> bc = R.apply_transpose(b);
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(bc.data(), nc);

  if (tau) {
    const Eigen::MatrixXd mass_c = project_to_coarse(R, *M);
    system += mass_c / *tau;
    if (p_prev_coarse) {
      rhs += mass_c * Eigen::Map<const Eigen::VectorXd>(p_prev_coarse, nc) / *tau;
    }
  }

  // A positive definite projected system certifies full column rank of R; on
  // failure the Gram diagnostic names the dependent column.
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    check_full_rank(R);
    throw NumericError("coarse system not positive definite at dimension " + std::to_string(nc));
  }
  const Eigen::VectorXd pc = llt.solve(rhs);
  if (!pc.allFinite()) {
    throw NumericError("coarse solve produced non-finite coefficients at dimension " +
                       std::to_string(nc));
  }

  CoarseSolveResult out;
  out.coarse.assign(pc.data(), pc.data() + nc);
  out.fine_rep = R.apply(out.coarse);
  return out;
}

CoarsePicardResult coarse_picard_solve(const FineGrid& fine, const BasisColumns& R,
                                       std::span<const double> kappa,
                                       std::span<const double> f_nodes,
                                       const double* p_prev_coarse, std::optional<double> tau,
                                       const PicardConfig& cfg) {
  if (!(cfg.delta0 > 0.0)) throw ConfigError("delta0 must be positive, got " + std::to_string(cfg.delta0));
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be at least 1, got " + std::to_string(cfg.max_iters));
  if (tau && !(*tau > 0.0)) throw ConfigError("tau must be positive, got " + std::to_string(*tau));
  const int n = fine.n_nodes();
  if (static_cast<int>(kappa.size()) != n || static_cast<int>(f_nodes.size()) != n) {
    throw DimensionError("kappa/source length does not match " + std::to_string(n) + " nodes");
  }

  const CsrMatrix M = assemble_mass(fine);
  const std::vector<double> load = assemble_load(fine, M, f_nodes);
  const std::vector<char> constrained(fine.on_boundary.begin(), fine.on_boundary.end());
  CsrMatrix mass_bc = M;
  zero_constrained(mass_bc, constrained);

  CoarsePicardResult result;
  std::vector<double> p_fine(n, 0.0);
  if (cfg.guess == PicardConfig::Guess::previous_step && p_prev_coarse) {
    p_fine = R.apply(std::span<const double>(p_prev_coarse, static_cast<std::size_t>(R.n_cols())));
  }

  for (int it = 0; it < cfg.max_iters; ++it) {
    const std::vector<double> cond = conductivity(kappa, p_fine);
    CsrMatrix A = assemble_stiffness(fine, cond);
    std::vector<double> rhs = load;
    apply_dirichlet(A, rhs, constrained);

    CoarseSolveResult step =
        coarse_solve(R, A, rhs, tau ? &mass_bc : nullptr, tau ? p_prev_coarse : nullptr, tau);
    const StoppingCheck check = stopping_criterion(step.fine_rep, p_fine, cfg.delta0);
    result.fine_iterates.push_back(step.fine_rep);
    result.iterations = it + 1;
    result.final_rel_change = check.rel_change;
    result.coarse = std::move(step.coarse);
    p_fine = std::move(step.fine_rep);
    if (check.converged) {
      result.converged = true;
      break;
    }
  }
  result.fine_rep = std::move(p_fine);
  return result;
}

}  // namespace msrich
