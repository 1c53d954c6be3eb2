#include "stabocp/linsys.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <cmath>
#include <fstream>
#include <ostream>
#include <regex>

namespace stabocp {

SparseMatrix SparseSystem::matrix() const {
  SparseMatrix a(n_, n_);
  a.setFromTriplets(triplets_.begin(), triplets_.end());
  return a;
}

void eliminate_dirichlet(SparseMatrix& a, Eigen::VectorXd& rhs, std::span<const char> constrained,
                         std::span<const double> values) {
  const auto n = static_cast<std::size_t>(a.rows());
  if (constrained.size() != n) throw InvalidInput("constraint mask has wrong size");
  if (!values.empty() && values.size() != n) throw InvalidInput("Dirichlet values have wrong size");
  a.makeCompressed();
  for (int col = 0; col < a.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
      const auto r = static_cast<std::size_t>(it.row());
      const auto c = static_cast<std::size_t>(col);
      if (constrained[c] && !values.empty() && !constrained[r]) rhs[it.row()] -= it.value() * values[c];
      if (constrained[r] || constrained[c]) it.valueRef() = 0;
    }
  a.prune(0.0);
  std::vector<Triplet> diag;
  for (std::size_t i = 0; i < n; ++i)
    if (constrained[i]) {
      diag.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      rhs[static_cast<Eigen::Index>(i)] = values.empty() ? 0.0 : values[i];
    }
  SparseMatrix d(a.rows(), a.cols());
  d.setFromTriplets(diag.begin(), diag.end());
  a += d;
}

namespace {

int zero_column_from_message(const std::string& msg) {
  std::smatch m;
  static const std::regex re("(\\d+)\\s*$");
  if (std::regex_search(msg, m, re)) return std::stoi(m[1]) - 1;
  return -1;
}

}  // namespace

Eigen::VectorXd solve(const SparseMatrix& a, const Eigen::VectorXd& b, const SolveOptions& opts) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw InvalidInput("solve: dimension mismatch");
  for (int col = 0; col < a.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(a, col); it; ++it)
      if (!std::isfinite(it.value())) throw InvalidInput("solve: non-finite matrix entry");
  if (!b.allFinite()) throw InvalidInput("solve: non-finite right-hand side");

  const double bnorm = b.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(b.size());

  Eigen::VectorXd x;
  if (opts.kind == SolverKind::SparseLU) {
    SparseMatrix ac = a;
    ac.makeCompressed();
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(ac);
    lu.factorize(ac);
    if (lu.info() != Eigen::Success) {
      // Eigen reports the 1-based column of the failing pivot in the column-permuted ordering.
      int dof = zero_column_from_message(lu.lastErrorMessage());
      if (dof >= 0 && dof < lu.colsPermutation().size()) {
        const auto& perm = lu.colsPermutation().indices();
        for (int i = 0; i < perm.size(); ++i)
          if (perm[i] == dof) {
            dof = i;
            break;
          }
      }
      throw SingularMatrixError("singular matrix (zero pivot at dof " + std::to_string(dof) + ")", dof);
    }
    x = lu.solve(b);
    // A few steps of iterative refinement if the first solve misses the contract.
    for (int it = 0; it < 3 && (a * x - b).norm() > opts.tol * bnorm; ++it) x += lu.solve(b - a * x);
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> it;
    it.setTolerance(opts.tol * 0.1);
    it.setMaxIterations(opts.max_iterations);
    it.compute(a);
    if (it.info() != Eigen::Success) throw SingularMatrixError("incomplete factorization failed", -1);
    x = it.solve(b);
    if (it.info() != Eigen::Success)
      throw NumericalError("BiCGSTAB did not converge within " + std::to_string(opts.max_iterations) + " iterations");
  }
  if (!x.allFinite()) throw SingularMatrixError("solution is not finite (matrix numerically singular)", -1);
  const double res = (a * x - b).norm();
  if (res > opts.tol * bnorm) {
    std::string what = "residual contract violated: ||Ax-b|| = " + std::to_string(res) +
                       " > tol*||b|| = " + std::to_string(opts.tol * bnorm);
    throw SingularMatrixError(what, -1);
  }
  return x;
}

Eigen::VectorXd solve(const SparseSystem& system, const SolveOptions& opts) {
  return solve(system.matrix(), system.rhs(), opts);
}

void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  out.precision(17);
  for (int col = 0; col < a.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(a, col); it; ++it)
      out << it.row() + 1 << ' ' << col + 1 << ' ' << it.value() << '\n';
}

void write_matrix_market(const std::string& path, const SparseMatrix& a) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path);
  write_matrix_market(out, a);
}

}  // namespace stabocp
