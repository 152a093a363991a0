#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msrich/grid.hpp"

namespace msrich {

struct CovarianceParams {
  double sigma2 = 2.0;
  double eta1 = 0.05;
  double eta2 = 0.2;
};

// Truncated Karhunen-Loeve basis of the exponential covariance kernel,
// computed from the dense node-sample covariance matrix. Eigenvalues are
// nonincreasing with negatives clipped to zero; modes are orthonormal in the
// node-sample (identity-weighted) inner product.
struct KleBasis {
  int n_nodes = 0;
  int n_terms = 0;  // N_upsilon
  std::vector<double> eigenvalues;
  std::vector<double> modes;  // column-major, n_nodes x n_terms
  double total_energy = 0.0;
  double captured_energy = 0.0;

  const double* mode(int k) const { return modes.data() + static_cast<std::size_t>(k) * n_nodes; }
};

KleBasis build_kle(const FineGrid& fine, const CovarianceParams& params, double energy_fraction);

struct KappaRange {
  double min = 10.0;
  double max = 2000.0;
};

struct PermeabilityField {
  std::vector<double> values;
  KappaRange range;
  std::uint64_t seed = 0;
};

// Draws the KLE coefficients from the counter-based stream of `seed`, then
// maps the Gaussian field affinely in log space so the nodal min and max hit
// the requested range exactly.
PermeabilityField sample_field(const KleBasis& basis, std::uint64_t seed, const KappaRange& range);

// Raw Gaussian field (before the log-space range mapping); used by tests.
std::vector<double> sample_gaussian_field(const KleBasis& basis, std::uint64_t seed);

// Pressure-dependent hydraulic conductivity kappa(x) / (1 + |p(x)|).
std::vector<double> conductivity(std::span<const double> kappa, std::span<const double> pressure);

// Flat little-endian float64 nodal field with a 16-byte "MSRF" header.
void save_field(const std::string& path, std::span<const double> values);
std::vector<double> load_field(const std::string& path);

inline constexpr std::uint32_t kFieldFormatVersion = 1;

}  // namespace msrich
