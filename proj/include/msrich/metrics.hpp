#pragma once

#include <optional>
#include <span>
#include <vector>

#include "msrich/sparse.hpp"

namespace msrich {

// Relative errors are returned as ratios; the reporting layer turns them into
// percentages. A zero denominator makes the ratio undefined, which is flagged
// instead of thrown so sweep drivers can keep going.
struct RelativeError {
  double value = 0.0;
  bool degenerate = false;
};

// Plain Euclidean ratio |pred - target| / |target| on coefficient vectors.
RelativeError rel_l2_vector(std::span<const double> pred, std::span<const double> target);

struct SolutionError {
  RelativeError l2;
  RelativeError h1;
};

// Quadrature-weighted relative errors of p_a against the reference p_b:
// the L2 part uses the consistent mass matrix, the H1 part the
// unit-coefficient stiffness (a gradient seminorm).
SolutionError solution_error(std::span<const double> p_a, std::span<const double> p_b,
                             const CsrMatrix& mass, const CsrMatrix& stiffness);

// Time-aggregated errors by the rectangle rule over accepted states:
// numerator^2 = tau * sum_s |d_s|^2 in the respective weight, denominator
// likewise over the reference trajectory. tau cancels in the ratio but is
// validated anyway.
SolutionError bochner_errors(const std::vector<std::vector<double>>& traj_a,
                             const std::vector<std::vector<double>>& traj_b,
                             const CsrMatrix& mass, const CsrMatrix& stiffness, double tau);

struct ErrorReport {
  std::vector<double> values;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  int highlight_index = -1;  // -1 when no sample is highlighted
  double highlight = 0.0;
};

ErrorReport aggregate(std::span<const double> values, std::optional<int> highlight_index);

}  // namespace msrich
