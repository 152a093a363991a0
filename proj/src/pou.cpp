#include "msrich/pou.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "msrich/errors.hpp"
#include "msrich/fem.hpp"
#include "msrich/sparse.hpp"

namespace msrich {
namespace {

// Discrete Laplace extension of one corner hat on the reference block (the
// unit square meshed k x k). The P1 stiffness of the Laplacian is invariant
// under uniform scaling in 2D, so this one solve serves every block.
std::vector<double> corner_field(const FineGrid& ref, const CsrMatrix& A, int corner_x,
                                 int corner_y) {
  const int k = ref.n;
  const int nn = k + 1;
  const int dim = ref.n_nodes();
  std::vector<double> u(dim, 0.0);
  auto hat = [k](int coord, int corner) {
    const double t = double(coord) / double(k);
    return corner == 0 ? 1.0 - t : t;
  };
  for (int iy = 0; iy < nn; ++iy) {
    for (int ix = 0; ix < nn; ++ix) {
      const int id = iy * nn + ix;
      if (ref.on_boundary[id]) u[id] = hat(ix, corner_x) * hat(iy, corner_y);
    }
  }

  std::vector<int> slot(dim, -1);
  std::vector<int> interior;
  for (int i = 0; i < dim; ++i) {
    if (!ref.on_boundary[i]) {
      slot[i] = int(interior.size());
      interior.push_back(i);
    }
  }
  const int ni = int(interior.size());
  if (ni == 0) return u;

  Eigen::MatrixXd a_ii = Eigen::MatrixXd::Zero(ni, ni);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ni);
  for (int i = 0; i < dim; ++i) {
    if (slot[i] < 0) continue;
    for (int idx = A.row_ptr[i]; idx < A.row_ptr[i + 1]; ++idx) {
      const int j = A.col[idx];
      if (slot[j] >= 0) {
        a_ii(slot[i], slot[j]) = A.val[idx];
      } else {
        rhs(slot[i]) -= A.val[idx] * u[j];
      }
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a_ii);
  if (llt.info() != Eigen::Success) {
    throw NumericError("partition of unity: block corner solve failed at corner (" +
                       std::to_string(corner_x) + ", " + std::to_string(corner_y) + ")");
  }
  Eigen::VectorXd x = llt.solve(rhs);
  for (int s = 0; s < ni; ++s) u[interior[s]] = x(s);
  return u;
}

}  // namespace

PartitionOfUnity partition_of_unity(const FineGrid& fine, const CoarseGrid& coarse) {
  if (coarse.n <= 0 || fine.n % coarse.n != 0) {
    throw ConfigError("partition of unity: incompatible grids (fine " + std::to_string(fine.n) +
                      ", coarse " + std::to_string(coarse.n) + ")");
  }
  const int k = fine.n / coarse.n;
  const FineGrid ref = make_fine_grid(k);
  const std::vector<double> ones(ref.n_nodes(), 1.0);
  const CsrMatrix a_ref = assemble_stiffness(ref, ones);

  std::array<std::vector<double>, 4> corner;  // index cy*2 + cx
  for (int cy = 0; cy < 2; ++cy) {
    for (int cx = 0; cx < 2; ++cx) corner[cy * 2 + cx] = corner_field(ref, a_ref, cx, cy);
  }

  PartitionOfUnity pou;
  pou.chi.assign(coarse.n_vertices(), std::vector<double>(fine.n_nodes(), 0.0));
  const int nn = fine.n + 1;
  const int rn = k + 1;
  for (int vy = 0; vy <= coarse.n; ++vy) {
    for (int vx = 0; vx <= coarse.n; ++vx) {
      auto& chi = pou.chi[coarse.vertex_index(vx, vy)];
      for (int by = vy - 1; by <= vy; ++by) {
        for (int bx = vx - 1; bx <= vx; ++bx) {
          if (bx < 0 || by < 0 || bx >= coarse.n || by >= coarse.n) continue;
          const auto& field = corner[(vy - by) * 2 + (vx - bx)];
          for (int ly = 0; ly <= k; ++ly) {
            for (int lx = 0; lx <= k; ++lx) {
              chi[(by * k + ly) * nn + (bx * k + lx)] = field[ly * rn + lx];
            }
          }
        }
      }
    }
  }

  // All blocks are congruent: the per-triangle weight is computed once on the
  // reference block and tiled. Gradients on the unit-square reference pick up
  // a factor coarse.n, squared here.
  const double scale = double(coarse.n) * double(coarse.n);
  std::vector<double> ref_sum(ref.n_tris(), 0.0);
  for (int t = 0; t < ref.n_tris(); ++t) {
    double s = 0.0;
    for (const auto& field : corner) {
      const Grad2 g = tri_gradient(ref, t, field.data());
      s += g.x * g.x + g.y * g.y;
    }
    ref_sum[t] = s * scale;
  }
  pou.grad_sq_sum.assign(fine.n_tris(), 0.0);
  for (int iy = 0; iy < fine.n; ++iy) {
    for (int ix = 0; ix < fine.n; ++ix) {
      const int local_cell = (iy % k) * k + (ix % k);
      const int cell = iy * fine.n + ix;
      pou.grad_sq_sum[2 * cell] = ref_sum[2 * local_cell];
      pou.grad_sq_sum[2 * cell + 1] = ref_sum[2 * local_cell + 1];
    }
  }
  return pou;
}

}  // namespace msrich
