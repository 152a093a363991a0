#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "msrich/grid.hpp"
#include "msrich/sparse.hpp"

namespace msrich {

struct PicardConfig {
  double delta0 = 1e-6;
  int max_iters = 10;
  enum class Guess { zero, previous_step };
  Guess guess = Guess::zero;
};

struct StoppingCheck {
  bool converged = false;
  bool degenerate_norm = false;  // previous iterate had zero norm
  double rel_change = 0.0;
};

// Relative-change test ||p_new - p_old|| / ||p_old|| <= delta0 on coefficient
// vectors. A zero-norm previous iterate counts as converged only when the new
// iterate is zero as well.
StoppingCheck stopping_criterion(std::span<const double> p_new, std::span<const double> p_old,
                                 double delta0);

struct PicardResult {
  std::vector<double> pressure;
  int iterations = 0;
  double final_rel_change = 0.0;
  bool converged = false;
  std::vector<std::vector<double>> iterates;  // one entry per Picard iterate
};

// One backward-Euler step (or the steady problem when tau is empty) solved by
// Picard linearization: (M/tau + A(kappa/(1+|p^n|))) p^{n+1} = M p_prev/tau + b.
// Homogeneous Dirichlet walls; p_prev_time may be null for the steady case.
PicardResult picard_solve(const FineGrid& fine, std::span<const double> kappa,
                          std::span<const double> f_nodes, const double* p_prev_time,
                          std::optional<double> tau, const PicardConfig& cfg);

using SourceFn = std::function<double(double t, double x, double y)>;

struct MarchResult {
  std::vector<std::vector<double>> states;  // accepted state per time step
  std::vector<int> picard_iters;
  std::vector<double> final_rel_change;
  std::vector<char> converged;
};

struct TimeConfig {
  double tau = 25e-7;
  int n_steps = 20;
};

MarchResult time_march(const FineGrid& fine, std::span<const double> kappa, const SourceFn& f,
                       const TimeConfig& time, const PicardConfig& cfg);

// Nodal samples of a source function at one time level.
std::vector<double> sample_source(const FineGrid& fine, const SourceFn& f, double t);

}  // namespace msrich
