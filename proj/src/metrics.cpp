#include "msrich/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "msrich/errors.hpp"

namespace msrich {

namespace {

RelativeError ratio(double num_sq, double den_sq) {
  RelativeError out;
  if (den_sq <= 0.0) {
    out.degenerate = true;
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.value = std::sqrt(num_sq / den_sq);
  return out;
}

double weighted_sq(const CsrMatrix& a, std::span<const double> d) {
  if (a.n != static_cast<int>(d.size())) {
    throw DimensionError("metrics: vector length " + std::to_string(d.size()) +
                         " does not match operator size " + std::to_string(a.n));
  }
  double s = 0.0;
  for (int i = 0; i < a.n; ++i) {
    double row = 0.0;
    for (int q = a.row_ptr[i]; q < a.row_ptr[i + 1]; ++q) row += a.val[q] * d[a.col[q]];
    s += row * d[i];
  }
  return std::max(0.0, s);
}

}  // namespace

RelativeError rel_l2_vector(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw DimensionError("rel_l2_vector: lengths " + std::to_string(pred.size()) + " and " +
                         std::to_string(target.size()) + " differ");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    num += d * d;
    den += target[i] * target[i];
  }
  return ratio(num, den);
}

SolutionError solution_error(std::span<const double> p_a, std::span<const double> p_b,
                             const CsrMatrix& mass, const CsrMatrix& stiffness) {
  if (p_a.size() != p_b.size()) {
    throw DimensionError("solution_error: lengths " + std::to_string(p_a.size()) + " and " +
                         std::to_string(p_b.size()) + " differ");
  }
  std::vector<double> d(p_a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = p_a[i] - p_b[i];
  SolutionError out;
  out.l2 = ratio(weighted_sq(mass, d), weighted_sq(mass, p_b));
  out.h1 = ratio(weighted_sq(stiffness, d), weighted_sq(stiffness, p_b));
  return out;
}

SolutionError bochner_errors(const std::vector<std::vector<double>>& traj_a,
                             const std::vector<std::vector<double>>& traj_b,
                             const CsrMatrix& mass, const CsrMatrix& stiffness, double tau) {
  if (traj_a.size() != traj_b.size() || traj_a.empty()) {
    throw DimensionError("bochner_errors: trajectories have " + std::to_string(traj_a.size()) +
                         " and " + std::to_string(traj_b.size()) + " states");
  }
  if (!(tau > 0.0)) throw ConfigError("bochner_errors: tau must be positive");

  double num_l2 = 0.0, den_l2 = 0.0, num_h1 = 0.0, den_h1 = 0.0;
  std::vector<double> d;
  for (std::size_t s = 0; s < traj_a.size(); ++s) {
    if (traj_a[s].size() != traj_b[s].size()) {
      throw DimensionError("bochner_errors: state " + std::to_string(s) + " lengths differ");
    }
    d.resize(traj_a[s].size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = traj_a[s][i] - traj_b[s][i];
    num_l2 += tau * weighted_sq(mass, d);
    den_l2 += tau * weighted_sq(mass, traj_b[s]);
    num_h1 += tau * weighted_sq(stiffness, d);
    den_h1 += tau * weighted_sq(stiffness, traj_b[s]);
  }
  SolutionError out;
  out.l2 = ratio(num_l2, den_l2);
  out.h1 = ratio(num_h1, den_h1);
  return out;
}

ErrorReport aggregate(std::span<const double> values, std::optional<int> highlight_index) {
  if (values.empty()) throw ConfigError("aggregate: empty value list");
  ErrorReport report;
  report.values.assign(values.begin(), values.end());
  report.min = report.max = values[0];
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    report.min = std::min(report.min, v);
    report.max = std::max(report.max, v);
  }
  report.mean = sum / static_cast<double>(values.size());
  if (highlight_index) {
    if (*highlight_index < 0 || *highlight_index >= static_cast<int>(values.size())) {
      throw ConfigError("aggregate: highlight index " + std::to_string(*highlight_index) +
                        " outside [0, " + std::to_string(values.size()) + ")");
    }
    report.highlight_index = *highlight_index;
    report.highlight = values[*highlight_index];
  }
  return report;
}

}  // namespace msrich
