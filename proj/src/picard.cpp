#include "msrich/picard.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "msrich/errors.hpp"
#include "msrich/fem.hpp"
#include "msrich/random_field.hpp"

namespace msrich {

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

void validate(const PicardConfig& cfg, std::optional<double> tau) {
  if (!(cfg.delta0 > 0.0)) throw ConfigError("delta0 must be positive, got " + std::to_string(cfg.delta0));
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be at least 1, got " + std::to_string(cfg.max_iters));
  if (tau && !(*tau > 0.0)) throw ConfigError("tau must be positive, got " + std::to_string(*tau));
}

}  // namespace

StoppingCheck stopping_criterion(std::span<const double> p_new, std::span<const double> p_old,
                                 double delta0) {
  if (p_new.size() != p_old.size()) {
    throw DimensionError("iterate lengths differ: " + std::to_string(p_new.size()) + " vs " +
                         std::to_string(p_old.size()));
  }
  StoppingCheck check;
  const double old_norm = norm2(p_old);
  double diff_sq = 0.0;
  for (std::size_t i = 0; i < p_new.size(); ++i) {
    const double d = p_new[i] - p_old[i];
    diff_sq += d * d;
  }
  if (old_norm == 0.0) {
    check.degenerate_norm = true;
    check.converged = (diff_sq == 0.0);
    check.rel_change = check.converged ? 0.0 : std::numeric_limits<double>::infinity();
    return check;
  }
  check.rel_change = std::sqrt(diff_sq) / old_norm;
  check.converged = (check.rel_change <= delta0);
  return check;
}

PicardResult picard_solve(const FineGrid& fine, std::span<const double> kappa,
                          std::span<const double> f_nodes, const double* p_prev_time,
                          std::optional<double> tau, const PicardConfig& cfg) {
  validate(cfg, tau);
  const int n = fine.n_nodes();
  if (static_cast<int>(kappa.size()) != n || static_cast<int>(f_nodes.size()) != n) {
    throw DimensionError("kappa/source length does not match " + std::to_string(n) + " nodes");
  }

  const CsrMatrix M = assemble_mass(fine);
  std::vector<double> load = assemble_load(fine, M, f_nodes);

  std::vector<double> rhs_time(n, 0.0);
  if (tau && p_prev_time) {
    std::span<const double> prev(p_prev_time, static_cast<std::size_t>(n));
    rhs_time = M.multiply(prev);
    for (double& v : rhs_time) v /= *tau;
  }

  PicardResult result;
  std::vector<double> p(n, 0.0);
  if (cfg.guess == PicardConfig::Guess::previous_step && p_prev_time) {
    p.assign(p_prev_time, p_prev_time + n);
  }

  std::vector<char> constrained(fine.on_boundary.begin(), fine.on_boundary.end());
  for (int it = 0; it < cfg.max_iters; ++it) {
    const std::vector<double> cond = conductivity(kappa, p);
    CsrMatrix A = assemble_stiffness(fine, cond);
    if (tau) {
      CooBuilder builder(n);
      for (int i = 0; i < n; ++i) {
        for (int q = A.row_ptr[i]; q < A.row_ptr[i + 1]; ++q) builder.add(i, A.col[q], A.val[q]);
        for (int q = M.row_ptr[i]; q < M.row_ptr[i + 1]; ++q) {
          builder.add(i, M.col[q], M.val[q] / *tau);
        }
      }
      A = builder.compress();
    }
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = load[i] + rhs_time[i];
    apply_dirichlet(A, rhs, constrained);

    std::vector<double> p_next = solve_spd(A, rhs);
    const StoppingCheck check = stopping_criterion(p_next, p, cfg.delta0);
    result.iterates.push_back(p_next);
    result.iterations = it + 1;
    result.final_rel_change = check.rel_change;
    p = std::move(p_next);
    if (check.converged) {
      result.converged = true;
      break;
    }
  }
  result.pressure = std::move(p);
  return result;
}

std::vector<double> sample_source(const FineGrid& fine, const SourceFn& f, double t) {
  std::vector<double> values(fine.n_nodes());
  for (int i = 0; i < fine.n_nodes(); ++i) values[i] = f(t, fine.nodes[i].x, fine.nodes[i].y);
  return values;
}

MarchResult time_march(const FineGrid& fine, std::span<const double> kappa, const SourceFn& f,
                       const TimeConfig& time, const PicardConfig& cfg) {
  if (time.n_steps < 1) throw ConfigError("n_steps must be at least 1, got " + std::to_string(time.n_steps));
  if (!(time.tau > 0.0)) throw ConfigError("tau must be positive, got " + std::to_string(time.tau));

  MarchResult out;
  std::vector<double> prev(fine.n_nodes(), 0.0);  // zero initial condition
  for (int s = 1; s <= time.n_steps; ++s) {
    const double t = s * time.tau;
    const std::vector<double> f_nodes = sample_source(fine, f, t);
    PicardResult step = picard_solve(fine, kappa, f_nodes, prev.data(), time.tau, cfg);
    prev = step.pressure;
    out.states.push_back(std::move(step.pressure));
    out.picard_iters.push_back(step.iterations);
    out.final_rel_change.push_back(step.final_rel_change);
    out.converged.push_back(step.converged ? 1 : 0);
  }
  return out;
}

}  // namespace msrich
