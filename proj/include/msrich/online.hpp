#pragma once

#include <optional>
#include <span>
#include <vector>

#include "msrich/grid.hpp"
#include "msrich/offline.hpp"
#include "msrich/pou.hpp"
#include "msrich/sparse.hpp"

namespace msrich {

// One residual-driven basis for a coarse neighborhood. eta lives on the local
// nodes of omega_j and vanishes on the patch boundary; phi is the partition of
// unity times eta with domain-boundary rows zeroed. phi may also be supplied
// directly (a predicted basis), in which case eta stays empty and enrich only
// sanitizes the boundary rows.
struct OnlineBasis {
  int vertex = -1;
  int time_step = 0;     // marching step of the enrichment event, 0 for steady
  int picard_index = 0;  // iterate the residual was evaluated at
  double residual_norm = 0.0;
  std::vector<double> eta;
  std::vector<double> phi;
};

// Residual of the current iterate against the interior test functions of
// omega_j, ordered like nb.interior_nodes. cond is the nodal conductivity of
// the frozen linearization state and p_new the iterate under test, both
// fine-grid vectors. With tau the mass/tau terms and the previous state enter;
// without tau both are dropped and p_prev_time is ignored.
std::vector<double> local_residual(const FineGrid& fine, const Neighborhood& nb,
                                   std::span<const double> cond,
                                   std::span<const double> p_new,
                                   std::span<const double> f_nodes,
                                   const double* p_prev_time,
                                   std::optional<double> tau);

struct OnlineEta {
  std::vector<double> eta;  // local nodal values, zero on the patch boundary
  double residual_norm = 0.0;
};

// Solves d(eta, v) = R(v) over the interior of omega_j, where d is the
// mass/tau + conductivity-weighted stiffness form (stiffness alone without
// tau). residual_norm is sqrt(d(eta, eta)), the energy norm of the residual
// functional.
OnlineEta online_eta(const FineGrid& fine, const Neighborhood& nb,
                     std::span<const double> cond, std::optional<double> tau,
                     std::span<const double> residual_interior);

// Residual solve for every coarse vertex. phi is left empty for enrich to
// fill; the tags are stamped onto each basis as given.
// Residual, local solve and bookkeeping for one neighborhood. The batch
// builder below and the per-vertex callers (dataset targets, timed runs)
// share this path; phi stays empty until finalize_phi or enrich.
OnlineBasis online_basis_for(const FineGrid& fine, const Neighborhood& nb,
                             std::span<const double> cond, std::span<const double> p_new,
                             std::span<const double> f_nodes, const double* p_prev_time,
                             std::optional<double> tau, int time_step, int picard_index);

std::vector<OnlineBasis> online_bases(const FineGrid& fine,
                                      const std::vector<Neighborhood>& nbs,
                                      std::span<const double> cond,
                                      std::span<const double> p_new,
                                      std::span<const double> f_nodes,
                                      const double* p_prev_time,
                                      std::optional<double> tau,
                                      int time_step, int picard_index);

struct OnlineWarning {
  int vertex = -1;
  double gram_defect = 0.0;  // pivot ratio of the column in the combined Gram factor
};

struct EnrichedSpace {
  int n_offline = 0;                // leading columns of R
  std::vector<OnlineBasis> online;  // bases that contributed a column, input order
  BasisColumns R;
  std::vector<OnlineWarning> warnings;
};

// Fills basis.phi as chi * eta when it was not supplied directly, then
// hard-zeroes the domain-boundary and patch-boundary slots either way. This is
// the one place the conforming online basis takes its final shape; enrich and
// the dataset writers both go through it.
void finalize_phi(const FineGrid& fine, const Neighborhood& nb, const std::vector<double>& chi,
                  OnlineBasis& basis);

// Appends one column per supplied basis after all offline columns, so each
// call rebuilds the online block from scratch and replaces whatever a prior
// event added. Bases whose column is identically zero are dropped, which keeps
// the offline space (and its solves) bit-identical when every residual
// vanishes. A nonzero column that sits numerically inside the span of the
// preceding columns is kept and reported in warnings.
EnrichedSpace enrich(const FineGrid& fine, const std::vector<Neighborhood>& nbs,
                     const PartitionOfUnity& pou, const OfflineSpace& offline,
                     std::vector<OnlineBasis> bases);

struct OnlineStepResult {
  std::vector<double> coarse;
  std::vector<double> fine_rep;
};

// One Picard step in the enriched space at the frozen linearization state:
// cond must be the same nodal conductivity the residuals were built with.
OnlineStepResult online_picard_step(const FineGrid& fine, const EnrichedSpace& enriched,
                                    std::span<const double> cond,
                                    std::span<const double> f_nodes,
                                    const double* p_prev_time,
                                    std::optional<double> tau);

// Marching steps (1-based) at which to rebuild online bases. An empty request
// yields {1, 5, 10, 15, 20} clipped to n_steps; an explicit list is validated
// against [1, n_steps], then sorted and deduplicated.
std::vector<int> schedule_enrichment(int n_steps, std::span<const int> requested);

}  // namespace msrich
