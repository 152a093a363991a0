#pragma once

#include <vector>

#include "msrich/grid.hpp"

namespace msrich {

// Coarse-vertex partition of unity. chi[j] is a full fine-node vector that
// vanishes outside the neighborhood of vertex j. grad_sq_sum[t] holds
// sum_l |grad chi_l|^2 on triangle t, the piecewise-constant weight of the
// local spectral mass form.
struct PartitionOfUnity {
  std::vector<std::vector<double>> chi;
  std::vector<double> grad_sq_sum;
};

// Solves, block by block, the discrete Laplace problem with bilinear hat
// boundary data (1 at the owning vertex, 0 at the other block corners,
// linear along the edges). All blocks of the uniform grid share one local
// factorization.
PartitionOfUnity partition_of_unity(const FineGrid& fine, const CoarseGrid& coarse);

}  // namespace msrich
