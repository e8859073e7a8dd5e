#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <limits>
#include <memory>
#include <vector>

#include "recon/common.hpp"

namespace recon {

enum class Sense { eq, ge, le };

struct LpEntry {
  int row = 0;
  int col = 0;
  double value = 0;
};

/// Bounded-variable dual simplex on  min c'x  s.t.  A x (sense) b,  l <= x <= u.
/// Each row gets a slack (A x + s = b) whose bounds encode the sense; the
/// initial basis is all slacks, structurals start at the bound that makes
/// them dual feasible, so no phase 1 is needed as long as structural bounds
/// are finite. The basis is kept as a sparse LU plus a product-form eta file.
class DualSimplex {
 public:
  enum class Status { optimal, infeasible, cutoff, iteration_limit };

  DualSimplex(int rows, int cols, const std::vector<LpEntry>& entries,
              const std::vector<double>& rhs, const std::vector<Sense>& sense,
              const std::vector<double>& cost, Exec exec = Exec::serial);

  int rows() const { return m_; }
  int cols() const { return n_; }

  /// Structural bounds; both must be finite.
  void set_bounds(int j, double lo, double hi);
  double lower(int j) const { return lo_[j]; }
  double upper(int j) const { return hi_[j]; }

  /// Runs from the current basis. Stops with `cutoff` once the (monotone)
  /// dual objective exceeds `cutoff`.
  Status solve(double cutoff = std::numeric_limits<double>::infinity());

  double objective() const;
  /// Structural values of the last solve.
  std::vector<double> solution() const { return {x_.begin(), x_.begin() + n_}; }
  long iterations() const { return iterations_; }
  /// Rows whose slack was basic and infeasible when the last solve proved infeasibility.
  int infeasible_row() const { return infeasible_row_; }

 private:
  void refactor();
  void recompute_primal();
  void recompute_duals();
  void place_nonbasic();
  void ftran(Eigen::VectorXd& v) const;
  void btran(Eigen::VectorXd& v) const;
  double column_dot(int j, const Eigen::VectorXd& y) const;
  int choose_leaving(bool bland) const;

  int m_, n_;
  Exec exec_;
  // Structural columns (CSC) and rows (CSR).
  std::vector<int> col_start_, col_row_;
  std::vector<double> col_val_;
  std::vector<int> row_start_, row_col_;
  std::vector<double> row_val_;
  std::vector<double> b_, c_, lo_, hi_;
  std::vector<double> x_, d_;
  std::vector<int> basic_;  // row -> variable
  std::vector<int> where_;  // variable -> row, or -1 when nonbasic
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu_;
  struct Eta {
    int row;
    std::vector<std::pair<int, double>> col;  // sparse copy of B^{-1} a_q
    double pivot;
  };
  std::vector<Eta> etas_;
  long iterations_ = 0;
  int infeasible_row_ = -1;
};

}  // namespace recon
