#pragma once

#include "stabocp/common.hpp"

#include <Eigen/Sparse>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace stabocp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Coordinate-format assembly buffer plus right-hand side. Duplicate entries
/// are summed when the matrix is compressed.
class SparseSystem {
 public:
  explicit SparseSystem(int n = 0) : n_(n), rhs_(Eigen::VectorXd::Zero(n)) {}

  int size() const { return n_; }
  void add(int row, int col, double value) { triplets_.emplace_back(row, col, value); }
  void add_rhs(int row, double value) { rhs_[row] += value; }
  void reserve(std::size_t n) { triplets_.reserve(n); }

  const std::vector<Triplet>& triplets() const { return triplets_; }
  Eigen::VectorXd& rhs() { return rhs_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }

  SparseMatrix matrix() const;

 private:
  int n_;
  std::vector<Triplet> triplets_;
  Eigen::VectorXd rhs_;
};

/// Imposes u[i] = values[i] for every i with constrained[i] != 0: the column is
/// moved to the right-hand side, the row and column are cleared and the
/// diagonal set to 1. `values` may be empty (homogeneous data).
void eliminate_dirichlet(SparseMatrix& a, Eigen::VectorXd& rhs, std::span<const char> constrained,
                         std::span<const double> values = {});

/// Singular or structurally deficient matrix. `dof` is the offending unknown (-1 if unknown).
class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(const std::string& what, int dof) : NumericalError(what), dof_(dof) {}
  int dof() const { return dof_; }

 private:
  int dof_;
};

enum class SolverKind { SparseLU, BiCGSTAB };

struct SolveOptions {
  SolverKind kind = SolverKind::SparseLU;
  double tol = 1e-10;
  int max_iterations = 5000;  // iterative solver only
};

/// Solves a x = b with ||a x - b|| <= tol ||b|| or throws.
Eigen::VectorXd solve(const SparseMatrix& a, const Eigen::VectorXd& b, const SolveOptions& opts = {});
Eigen::VectorXd solve(const SparseSystem& system, const SolveOptions& opts = {});

/// MatrixMarket coordinate (real general) dump.
void write_matrix_market(std::ostream& out, const SparseMatrix& a);
void write_matrix_market(const std::string& path, const SparseMatrix& a);

}  // namespace stabocp
