#pragma once

#include <span>
#include <vector>

namespace msrich {

// Square CSR matrix. Column indices are strictly ascending within each row;
// duplicate insertions are summed at compression time in insertion order, so
// assembly is bitwise reproducible for a fixed element ordering.
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr;  // size n+1
  std::vector<int> col;
  std::vector<double> val;

  int nnz() const { return static_cast<int>(col.size()); }
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;
  double coeff(int i, int j) const;  // 0 when the entry is absent
  double symmetry_defect() const;    // max |A - A^T| over stored entries
};

class CooBuilder {
 public:
  explicit CooBuilder(int n) : n_(n) {}
  void add(int i, int j, double v) { entries_.push_back({i, j, v}); }
  CsrMatrix compress() const;

 private:
  struct Entry {
    int i;
    int j;
    double v;
  };
  int n_;
  std::vector<Entry> entries_;
};

struct CgResult {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

// Jacobi-preconditioned conjugate gradients for SPD systems.
CgResult pcg_solve(const CsrMatrix& A, std::span<const double> b, std::vector<double>& x,
                   double rel_tol, int max_iters);

// Direct solve through a dense Cholesky factorization; intended for small
// systems where a factorization beats iteration.
std::vector<double> dense_spd_solve(const CsrMatrix& A, std::span<const double> b);

// Solver used throughout the fine-scale path: dense direct below the size
// threshold, PCG at relative residual 1e-12 with iteration cap 20*n above it.
std::vector<double> solve_spd(const CsrMatrix& A, std::span<const double> b);

inline constexpr int kDenseSolveThreshold = 400;
inline constexpr double kPcgRelTol = 1e-12;

// Symmetric elimination of homogeneous Dirichlet rows/columns: zeroes the
// row and column of each constrained node, puts 1 on the diagonal and 0 in
// the right-hand side.
void apply_dirichlet(CsrMatrix& A, std::span<double> b, std::span<const char> constrained);

// Zeroes constrained rows and columns without the diagonal identity; for
// secondary operators (the mass in a time step) when the primary system
// already carries the Dirichlet rows.
void zero_constrained(CsrMatrix& A, std::span<const char> constrained);

}  // namespace msrich
