#pragma once

#include "tracelift/common.h"

#include <Eigen/CholmodSupport>
#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>

#include <memory>
#include <vector>

namespace tracelift
{

using SpMat = Eigen::SparseMatrix<double>;

namespace linalg
{

/// Numerical rank by column-pivoted QR (LAPACK dgeqp3): number of
/// diagonal entries of R with |R_ii| > rel_tol * |R_00|.
int numeric_rank(const Eigen::MatrixXd& A, double rel_tol = 1e-9);

/// Rows/columns with mask[i] != 0 (mask indexed by the full dimension).
SpMat select(const SpMat& A, const std::vector<char>& row_mask,
             const std::vector<char>& col_mask);

/// Indices i with mask[i] == value.
std::vector<int> indices(const std::vector<char>& mask, char value = 1);

/// Sparse Cholesky (CHOLMOD supernodal) for SPD systems.
class SpdSolver
{
public:
  explicit SpdSolver(const SpMat& A);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;

private:
  std::unique_ptr<Eigen::CholmodSupernodalLLT<SpMat>> _llt;
};

/// Sparse LU (UMFPACK) for indefinite systems such as saddle points.
class LuSolver
{
public:
  explicit LuSolver(const SpMat& A);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;

private:
  SpMat _A; // UMFPACK reads the matrix again during solves
  std::unique_ptr<Eigen::UmfPackLU<SpMat>> _lu;
};

/// Builds a sparse matrix from blocks given as (row offset, col offset,
/// block) triples.
SpMat assemble_blocks(int rows, int cols,
                      const std::vector<std::tuple<int, int, SpMat>>& blocks);

/// Largest generalized eigenvalue of A x = lambda B x with B SPD (dense).
double max_generalized_eigenvalue(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& B);

/// All generalized eigenvalues (ascending) of A x = lambda B x, B SPD.
Eigen::VectorXd generalized_eigenvalues(const Eigen::MatrixXd& A,
                                        const Eigen::MatrixXd& B);

} // namespace linalg
} // namespace tracelift
