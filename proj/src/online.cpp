#include "msrich/online.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "msrich/errors.hpp"
#include "msrich/fem.hpp"

namespace msrich {

namespace {

void check_nodal(const FineGrid& fine, std::span<const double> v, const char* caller) {
  if (static_cast<int>(v.size()) != fine.n_nodes()) {
    throw DimensionError(std::string(caller) + ": nodal vector length " +
                         std::to_string(v.size()) + " does not match " +
                         std::to_string(fine.n_nodes()) + " grid nodes");
  }
}

void check_time_args(const double* p_prev_time, std::optional<double> tau, const char* caller) {
  if (tau && !(*tau > 0.0)) {
    throw ConfigError(std::string(caller) + ": tau must be positive");
  }
  if (tau && p_prev_time == nullptr) {
    throw ConfigError(std::string(caller) + ": time mode needs the previous state");
  }
}

// Interior slot of each local node, -1 on the patch boundary. Slots follow the
// order of nb.interior_nodes (both lists are sorted by global index).
std::vector<int> interior_slots(const Neighborhood& nb) {
  std::vector<int> slot(nb.n_local(), -1);
  int k = 0;
  for (int l = 0; l < nb.n_local(); ++l) {
    if (nb.node_is_interior[l]) slot[l] = k++;
  }
  return slot;
}

// Appends one column per kept basis and scans the combined Gram matrix with an
// unpivoted incremental Cholesky factor; an online column whose pivot is a
// negligible fraction of its squared norm lies in the span of the columns
// before it.
void record_gram_warnings(EnrichedSpace& s) {
  const int nc = s.R.n_cols();
  if (nc == s.n_offline) return;

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nc, nc);
  std::vector<double> dense(s.R.n_rows, 0.0);
  for (int c = 0; c < nc; ++c) {
    const auto& ids_c = s.R.rows[c];
    const auto& vals_c = s.R.vals[c];
    for (std::size_t q = 0; q < ids_c.size(); ++q) dense[ids_c[q]] = vals_c[q];
    for (int r = 0; r <= c; ++r) {
      double dot = 0.0;
      const auto& ids_r = s.R.rows[r];
      const auto& vals_r = s.R.vals[r];
      for (std::size_t q = 0; q < ids_r.size(); ++q) dot += vals_r[q] * dense[ids_r[q]];
      gram(r, c) = dot;
      gram(c, r) = dot;
    }
    for (int id : ids_c) dense[id] = 0.0;
  }

  Eigen::MatrixXd fac = Eigen::MatrixXd::Zero(nc, nc);
  for (int c = 0; c < nc; ++c) {
    Eigen::VectorXd y(c);
    if (c > 0) {
      y = fac.topLeftCorner(c, c).triangularView<Eigen::Lower>().solve(
          gram.col(c).head(c).eval());
      fac.row(c).head(c) = y.transpose();
    }
    const double pivot = gram(c, c) - (c > 0 ? y.squaredNorm() : 0.0);
    if (c >= s.n_offline) {
      const double ratio = gram(c, c) > 0.0 ? pivot / gram(c, c) : 0.0;
      if (!(ratio > 1e-12)) {
        s.warnings.push_back({s.R.owner[c], std::max(ratio, 0.0)});
      }
    }
    fac(c, c) = std::sqrt(std::max(pivot, 1e-300));
  }
}

}  // namespace

std::vector<double> local_residual(const FineGrid& fine, const Neighborhood& nb,
                                   std::span<const double> cond,
                                   std::span<const double> p_new,
                                   std::span<const double> f_nodes,
                                   const double* p_prev_time,
                                   std::optional<double> tau) {
  check_nodal(fine, cond, "local_residual");
  check_nodal(fine, p_new, "local_residual");
  check_nodal(fine, f_nodes, "local_residual");
  check_time_args(p_prev_time, tau, "local_residual");

  const CsrMatrix a_loc = assemble_local_stiffness(fine, nb, cond);
  const CsrMatrix m_loc = assemble_local_mass(fine, nb);

  const int nl = nb.n_local();
  std::vector<double> p_loc(nl), f_loc(nl);
  for (int l = 0; l < nl; ++l) {
    p_loc[l] = p_new[nb.nodes[l]];
    f_loc[l] = f_nodes[nb.nodes[l]];
  }

  // R(v) = (M p_prev / tau + M f) - (M p_new / tau + A p_new); interior rows
  // of the local assemblies equal the global ones since an interior node's
  // element star lies inside omega_j.
  std::vector<double> r = m_loc.multiply(f_loc);
  const std::vector<double> a_p = a_loc.multiply(p_loc);
  if (tau) {
    std::vector<double> prev_loc(nl);
    for (int l = 0; l < nl; ++l) prev_loc[l] = p_prev_time[nb.nodes[l]];
    const std::vector<double> m_prev = m_loc.multiply(prev_loc);
    const std::vector<double> m_new = m_loc.multiply(p_loc);
    for (int l = 0; l < nl; ++l) r[l] += (m_prev[l] - m_new[l]) / *tau;
  }
  for (int l = 0; l < nl; ++l) r[l] -= a_p[l];

  std::vector<double> out;
  out.reserve(nb.n_interior());
  for (int l = 0; l < nl; ++l) {
    if (nb.node_is_interior[l]) out.push_back(r[l]);
  }
  return out;
}

OnlineEta online_eta(const FineGrid& fine, const Neighborhood& nb,
                     std::span<const double> cond, std::optional<double> tau,
                     std::span<const double> residual_interior) {
  check_nodal(fine, cond, "online_eta");
  if (tau && !(*tau > 0.0)) throw ConfigError("online_eta: tau must be positive");
  const int ni = nb.n_interior();
  if (static_cast<int>(residual_interior.size()) != ni) {
    throw DimensionError("online_eta: residual length " +
                         std::to_string(residual_interior.size()) + " does not match " +
                         std::to_string(ni) + " interior nodes");
  }

  const CsrMatrix a_loc = assemble_local_stiffness(fine, nb, cond);
  CsrMatrix m_loc;
  if (tau) m_loc = assemble_local_mass(fine, nb);

  const std::vector<int> slot = interior_slots(nb);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(ni, ni);
  for (int l = 0; l < nb.n_local(); ++l) {
    if (slot[l] < 0) continue;
    for (int q = a_loc.row_ptr[l]; q < a_loc.row_ptr[l + 1]; ++q) {
      const int cs = slot[a_loc.col[q]];
      if (cs >= 0) d(slot[l], cs) += a_loc.val[q];
    }
    if (tau) {
      for (int q = m_loc.row_ptr[l]; q < m_loc.row_ptr[l + 1]; ++q) {
        const int cs = slot[m_loc.col[q]];
        if (cs >= 0) d(slot[l], cs) += m_loc.val[q] / *tau;
      }
    }
  }

  Eigen::VectorXd rhs(ni);
  for (int i = 0; i < ni; ++i) rhs[i] = residual_interior[i];
  const Eigen::LLT<Eigen::MatrixXd> llt(d);
  if (llt.info() != Eigen::Success) {
    throw NumericError("online_eta: local form not positive definite at vertex " +
                       std::to_string(nb.vertex));
  }
  const Eigen::VectorXd x = llt.solve(rhs);

  OnlineEta out;
  out.eta.assign(nb.n_local(), 0.0);
  for (int l = 0; l < nb.n_local(); ++l) {
    if (slot[l] >= 0) out.eta[l] = x[slot[l]];
  }
  out.residual_norm = std::sqrt(std::max(0.0, x.dot(d * x)));
  return out;
}

OnlineBasis online_basis_for(const FineGrid& fine, const Neighborhood& nb,
                             std::span<const double> cond, std::span<const double> p_new,
                             std::span<const double> f_nodes, const double* p_prev_time,
                             std::optional<double> tau, int time_step, int picard_index) {
  const std::vector<double> res = local_residual(fine, nb, cond, p_new, f_nodes, p_prev_time, tau);
  OnlineEta sol = online_eta(fine, nb, cond, tau, res);
  OnlineBasis basis;
  basis.vertex = nb.vertex;
  basis.time_step = time_step;
  basis.picard_index = picard_index;
  basis.residual_norm = sol.residual_norm;
  basis.eta = std::move(sol.eta);
  return basis;
}

std::vector<OnlineBasis> online_bases(const FineGrid& fine,
                                      const std::vector<Neighborhood>& nbs,
                                      std::span<const double> cond,
                                      std::span<const double> p_new,
                                      std::span<const double> f_nodes,
                                      const double* p_prev_time,
                                      std::optional<double> tau,
                                      int time_step, int picard_index) {
  std::vector<OnlineBasis> out;
  out.reserve(nbs.size());
  for (const Neighborhood& nb : nbs) {
    out.push_back(online_basis_for(fine, nb, cond, p_new, f_nodes, p_prev_time, tau, time_step,
                                   picard_index));
  }
  return out;
}

void finalize_phi(const FineGrid& fine, const Neighborhood& nb, const std::vector<double>& chi,
                  OnlineBasis& basis) {
  const int nl = nb.n_local();
  if (basis.phi.empty()) {
    if (static_cast<int>(basis.eta.size()) != nl) {
      throw DimensionError("finalize_phi: eta length mismatch at vertex " +
                           std::to_string(basis.vertex));
    }
    basis.phi.resize(nl);
    for (int l = 0; l < nl; ++l) basis.phi[l] = chi[nb.nodes[l]] * basis.eta[l];
  } else if (static_cast<int>(basis.phi.size()) != nl) {
    throw DimensionError("finalize_phi: phi length mismatch at vertex " +
                         std::to_string(basis.vertex));
  }
  for (int l = 0; l < nl; ++l) {
    if (fine.on_boundary[nb.nodes[l]] || !nb.node_is_interior[l]) basis.phi[l] = 0.0;
  }
}

EnrichedSpace enrich(const FineGrid& fine, const std::vector<Neighborhood>& nbs,
                     const PartitionOfUnity& pou, const OfflineSpace& offline,
                     std::vector<OnlineBasis> bases) {
  if (offline.R.n_rows != fine.n_nodes()) {
    throw DimensionError("enrich: offline operator has " + std::to_string(offline.R.n_rows) +
                         " rows for a grid with " + std::to_string(fine.n_nodes()) + " nodes");
  }
  if (pou.chi.size() != nbs.size()) {
    throw DimensionError("enrich: partition of unity does not match the neighborhoods");
  }

  EnrichedSpace out;
  out.n_offline = offline.R.n_cols();
  out.R = offline.R;

  std::vector<char> seen(nbs.size(), 0);
  for (OnlineBasis& basis : bases) {
    if (basis.vertex < 0 || basis.vertex >= static_cast<int>(nbs.size())) {
      throw ConfigError("enrich: basis vertex " + std::to_string(basis.vertex) +
                        " out of range");
    }
    if (seen[basis.vertex]) {
      throw ConfigError("enrich: duplicate online basis for vertex " +
                        std::to_string(basis.vertex));
    }
    seen[basis.vertex] = 1;

    const Neighborhood& nb = nbs[basis.vertex];
    const int nl = nb.n_local();
    finalize_phi(fine, nb, pou.chi[basis.vertex], basis);

    std::vector<int> ids;
    std::vector<double> vals;
    for (int l = 0; l < nl; ++l) {
      if (basis.phi[l] != 0.0) {
        ids.push_back(nb.nodes[l]);
        vals.push_back(basis.phi[l]);
      }
    }
    if (ids.empty()) continue;
    out.R.append(basis.vertex, std::move(ids), std::move(vals));
    out.online.push_back(std::move(basis));
  }

  record_gram_warnings(out);
  return out;
}

OnlineStepResult online_picard_step(const FineGrid& fine, const EnrichedSpace& enriched,
                                    std::span<const double> cond,
                                    std::span<const double> f_nodes,
                                    const double* p_prev_time,
                                    std::optional<double> tau) {
  check_nodal(fine, cond, "online_picard_step");
  check_nodal(fine, f_nodes, "online_picard_step");
  check_time_args(p_prev_time, tau, "online_picard_step");

  const int n = fine.n_nodes();
  CsrMatrix system = assemble_stiffness(fine, cond);
  const CsrMatrix mass = assemble_mass(fine);
  std::vector<double> rhs = assemble_load(fine, mass, f_nodes);
  if (tau) {
    CooBuilder builder(n);
    for (int i = 0; i < n; ++i) {
      for (int q = system.row_ptr[i]; q < system.row_ptr[i + 1]; ++q) {
        builder.add(i, system.col[q], system.val[q]);
      }
      for (int q = mass.row_ptr[i]; q < mass.row_ptr[i + 1]; ++q) {
        builder.add(i, mass.col[q], mass.val[q] / *tau);
      }
    }
    system = builder.compress();
    const std::vector<double> m_prev =
        mass.multiply(std::span<const double>(p_prev_time, p_prev_time + n));
    for (int i = 0; i < n; ++i) rhs[i] += m_prev[i] / *tau;
  }
  apply_dirichlet(system, rhs, fine.on_boundary);

  CoarseSolveResult sol = coarse_solve(enriched.R, system, rhs, nullptr, nullptr, std::nullopt);
  return {std::move(sol.coarse), std::move(sol.fine_rep)};
}

std::vector<int> schedule_enrichment(int n_steps, std::span<const int> requested) {
  if (n_steps < 1) throw ConfigError("schedule_enrichment: need at least one step");
  std::vector<int> out;
  if (requested.empty()) {
    for (int s : {1, 5, 10, 15, 20}) {
      if (s <= n_steps) out.push_back(s);
    }
    return out;
  }
  out.assign(requested.begin(), requested.end());
  for (int s : out) {
    if (s < 1 || s > n_steps) {
      throw ConfigError("schedule_enrichment: step " + std::to_string(s) + " outside [1, " +
                        std::to_string(n_steps) + "]");
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace msrich
