#include "msrich/random_field.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "msrich/binary_io.hpp"
#include "msrich/errors.hpp"
#include "msrich/rng.hpp"

namespace msrich {

KleBasis build_kle(const FineGrid& fine, const CovarianceParams& params, double energy_fraction) {
  if (!(energy_fraction > 0.0) || energy_fraction > 1.0) {
    throw ConfigError("energy fraction must lie in (0, 1], got " + std::to_string(energy_fraction));
  }
  if (params.sigma2 <= 0.0 || params.eta1 <= 0.0 || params.eta2 <= 0.0) {
    throw ConfigError("covariance parameters must be positive (sigma2 " +
                      std::to_string(params.sigma2) + ", eta1 " + std::to_string(params.eta1) +
                      ", eta2 " + std::to_string(params.eta2) + ")");
  }

  const int n = fine.n_nodes();
  Eigen::MatrixXd C(n, n);
  const double inv_eta1_sq = 1.0 / (params.eta1 * params.eta1);
  const double inv_eta2_sq = 1.0 / (params.eta2 * params.eta2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double dx = fine.nodes[i].x - fine.nodes[j].x;
      const double dy = fine.nodes[i].y - fine.nodes[j].y;
      const double v =
          params.sigma2 * std::exp(-std::sqrt(dx * dx * inv_eta1_sq + dy * dy * inv_eta2_sq));
      C(i, j) = v;
      C(j, i) = v;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C);
  if (solver.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");

  // Eigen returns ascending order; flip to nonincreasing and clip negatives.
  KleBasis basis;
  basis.n_nodes = n;
  std::vector<double> values(n);
  for (int k = 0; k < n; ++k) values[k] = std::max(solver.eigenvalues()(n - 1 - k), 0.0);
  for (double v : values) basis.total_energy += v;

  double captured = 0.0;
  int n_terms = 0;
  const double target = energy_fraction * basis.total_energy;
  while (n_terms < n && captured < target) {
    captured += values[n_terms];
    ++n_terms;
  }
  basis.n_terms = n_terms;
  basis.captured_energy = captured;
  basis.eigenvalues.assign(values.begin(), values.begin() + n_terms);
  basis.modes.resize(static_cast<std::size_t>(n) * n_terms);
  for (int k = 0; k < n_terms; ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - k);
    std::copy(v.data(), v.data() + n, basis.modes.begin() + static_cast<std::size_t>(k) * n);
  }
  return basis;
}

std::vector<double> sample_gaussian_field(const KleBasis& basis, std::uint64_t seed) {
  if (basis.n_terms < 1) {
    throw ConfigError("KLE basis has no terms (energy fraction too small for this grid)");
  }
  Philox rng(seed);
  std::vector<double> field(basis.n_nodes, 0.0);
  for (int k = 0; k < basis.n_terms; ++k) {
    const double amp = std::sqrt(basis.eigenvalues[k]) * rng.normal();
    const double* mode = basis.mode(k);
    for (int i = 0; i < basis.n_nodes; ++i) field[i] += amp * mode[i];
  }
  return field;
}

PermeabilityField sample_field(const KleBasis& basis, std::uint64_t seed, const KappaRange& range) {
  if (!(range.min > 0.0) || !(range.max > range.min)) {
    throw ConfigError("permeability range must satisfy 0 < min < max, got [" +
                      std::to_string(range.min) + ", " + std::to_string(range.max) + "]");
  }
  std::vector<double> upsilon = sample_gaussian_field(basis, seed);
  const auto [lo_it, hi_it] = std::minmax_element(upsilon.begin(), upsilon.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  PermeabilityField field;
  field.range = range;
  field.seed = seed;
  field.values.resize(upsilon.size());

  const double log_min = std::log(range.min);
  const double log_max = std::log(range.max);
  if (hi - lo < 1e-14) {
    // Degenerate flat draw: fall back to the geometric midpoint of the range.
    std::fill(field.values.begin(), field.values.end(), std::sqrt(range.min * range.max));
    return field;
  }
  const double inv_span = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < upsilon.size(); ++i) {
    if (upsilon[i] == lo) {
      field.values[i] = range.min;  // extremes hit the range endpoints exactly
    } else if (upsilon[i] == hi) {
      field.values[i] = range.max;
    } else {
      const double t = (upsilon[i] - lo) * inv_span;
      const double v = std::exp((1.0 - t) * log_min + t * log_max);
      field.values[i] = std::clamp(v, range.min, range.max);
    }
  }
  return field;
}

std::vector<double> conductivity(std::span<const double> kappa, std::span<const double> pressure) {
  if (kappa.size() != pressure.size()) {
    throw DimensionError("kappa length " + std::to_string(kappa.size()) +
                         " does not match pressure length " + std::to_string(pressure.size()));
  }
  std::vector<double> out(kappa.size());
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    if (!std::isfinite(pressure[i])) {
      throw InputError("non-finite pressure at node " + std::to_string(i));
    }
    out[i] = kappa[i] / (1.0 + std::abs(pressure[i]));
  }
  return out;
}

void save_field(const std::string& path, std::span<const double> values) {
  BinaryWriter w(path);
  w.magic("MSRF");
  w.u32(kFieldFormatVersion);
  w.u64(values.size());
  w.f64_array(values);
  w.finish();
}

std::vector<double> load_field(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MSRF");
  const std::uint32_t version = r.u32();
  if (version != kFieldFormatVersion) {
    throw IoError(path + ": unsupported field format version " + std::to_string(version));
  }
  const std::uint64_t count = r.u64();
  auto values = r.f64_array(count);
  r.expect_eof();
  return values;
}

}  // namespace msrich
