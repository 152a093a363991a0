#include "msrich/sparse.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msrich/errors.hpp"

namespace msrich {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) acc += val[p] * x[col[p]];
    y[i] = acc;
  }
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n);
  multiply(x, y);
  return y;
}

double CsrMatrix::coeff(int i, int j) const {
  const auto first = col.begin() + row_ptr[i];
  const auto last = col.begin() + row_ptr[i + 1];
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return val[it - col.begin()];
}

double CsrMatrix::symmetry_defect() const {
  double defect = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      defect = std::max(defect, std::abs(val[p] - coeff(col[p], i)));
    }
  }
  return defect;
}

CsrMatrix CooBuilder::compress() const {
  std::vector<int> order(entries_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (entries_[a].i != entries_[b].i) return entries_[a].i < entries_[b].i;
    return entries_[a].j < entries_[b].j;
  });

  CsrMatrix A;
  A.n = n_;
  A.row_ptr.assign(n_ + 1, 0);
  for (std::size_t s = 0; s < order.size(); ++s) {
    const Entry& e = entries_[order[s]];
    if (e.i < 0 || e.i >= n_ || e.j < 0 || e.j >= n_) {
      throw std::out_of_range("matrix entry (" + std::to_string(e.i) + ", " +
                              std::to_string(e.j) + ") outside dimension " + std::to_string(n_));
    }
    const bool same_slot =
        s > 0 && entries_[order[s - 1]].i == e.i && entries_[order[s - 1]].j == e.j;
    if (same_slot) {
      A.val.back() += e.v;
    } else {
      A.col.push_back(e.j);
      A.val.push_back(e.v);
      A.row_ptr[e.i + 1]++;
    }
  }
  for (int i = 0; i < n_; ++i) A.row_ptr[i + 1] += A.row_ptr[i];
  return A;
}

CgResult pcg_solve(const CsrMatrix& A, std::span<const double> b, std::vector<double>& x,
                   double rel_tol, int max_iters) {
  const int n = A.n;
  if (static_cast<int>(b.size()) != n) {
    throw DimensionError("rhs length " + std::to_string(b.size()) + " does not match matrix " +
                         std::to_string(n));
  }
  x.assign(n, 0.0);

  std::vector<double> inv_diag(n);
  for (int i = 0; i < n; ++i) {
    const double d = A.coeff(i, i);
    if (d <= 0.0) throw NumericError("non-positive diagonal " + std::to_string(d) + " at row " + std::to_string(i));
    inv_diag[i] = 1.0 / d;
  }

  const double b_norm = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
  CgResult res;
  if (b_norm == 0.0) {
    res.converged = true;
    return res;
  }

  std::vector<double> r(b.begin(), b.end());
  std::vector<double> z(n), p(n), Ap(n);
  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);

  for (int it = 0; it < max_iters; ++it) {
    A.multiply(p, Ap);
    const double pAp = std::inner_product(p.begin(), p.end(), Ap.begin(), 0.0);
    if (pAp <= 0.0) throw NumericError("PCG hit non-positive curvature " + std::to_string(pAp));
    const double alpha = rz / pAp;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    const double r_norm = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
    res.iterations = it + 1;
    res.rel_residual = r_norm / b_norm;
    if (res.rel_residual <= rel_tol) {
      res.converged = true;
      return res;
    }
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

std::vector<double> dense_spd_solve(const CsrMatrix& A, std::span<const double> b) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(A.n, A.n);
  for (int i = 0; i < A.n; ++i) {
    for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) D(i, A.col[p]) = A.val[p];
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(D);
  if (ldlt.info() != Eigen::Success) throw NumericError("dense factorization failed for n = " + std::to_string(A.n));
  Eigen::Map<const Eigen::VectorXd> bv(b.data(), b.size());
  Eigen::VectorXd xv = ldlt.solve(bv);
  return {xv.data(), xv.data() + xv.size()};
}

std::vector<double> solve_spd(const CsrMatrix& A, std::span<const double> b) {
  if (A.n < kDenseSolveThreshold) return dense_spd_solve(A, b);
  std::vector<double> x;
  const CgResult res = pcg_solve(A, b, x, kPcgRelTol, 20 * A.n);
  if (!res.converged) {
    throw NumericError("PCG failed to reach " + std::to_string(kPcgRelTol) + " after " +
                       std::to_string(res.iterations) + " iterations (relative residual " +
                       std::to_string(res.rel_residual) + ")");
  }
  return x;
}

void apply_dirichlet(CsrMatrix& A, std::span<double> b, std::span<const char> constrained) {
  if (static_cast<int>(constrained.size()) != A.n || b.size() != constrained.size()) {
    throw DimensionError("constraint mask length does not match system of size " + std::to_string(A.n));
  }
  for (int i = 0; i < A.n; ++i) {
    for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) {
      const int j = A.col[p];
      if (constrained[i] || constrained[j]) A.val[p] = (i == j) ? 1.0 : 0.0;
    }
    if (constrained[i]) b[i] = 0.0;
  }
}

void zero_constrained(CsrMatrix& A, std::span<const char> constrained) {
  if (static_cast<int>(constrained.size()) != A.n) {
    throw DimensionError("constraint mask length does not match system of size " + std::to_string(A.n));
  }
  for (int i = 0; i < A.n; ++i) {
    for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) {
      if (constrained[i] || constrained[A.col[p]]) A.val[p] = 0.0;
    }
  }
}

}  // namespace msrich
