#include "tracelift/linalg.h"

#include <lapacke.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <tuple>

namespace tracelift::linalg
{

int numeric_rank(const Eigen::MatrixXd& A, double rel_tol)
{
  const lapack_int m = static_cast<lapack_int>(A.rows());
  const lapack_int n = static_cast<lapack_int>(A.cols());
  if (m == 0 or n == 0)
    return 0;
  Eigen::MatrixXd R = A; // column-major copy overwritten by dgeqp3
  std::vector<lapack_int> jpvt(n, 0);
  std::vector<double> tau(std::min(m, n));
  const lapack_int info = LAPACKE_dgeqp3(LAPACK_COL_MAJOR, m, n, R.data(), m,
                                         jpvt.data(), tau.data());
  if (info != 0)
    throw Error("dgeqp3 failed with info " + std::to_string(info));
  const double r00 = std::abs(R(0, 0));
  if (r00 == 0.0)
    return 0;
  int rank = 0;
  for (lapack_int i = 0; i < std::min(m, n); ++i)
    if (std::abs(R(i, i)) > rel_tol * r00)
      ++rank;
  return rank;
}

std::vector<int> indices(const std::vector<char>& mask, char value)
{
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if ((mask[i] != 0) == (value != 0))
      out.push_back(static_cast<int>(i));
  return out;
}

SpMat select(const SpMat& A, const std::vector<char>& row_mask,
             const std::vector<char>& col_mask)
{
  std::vector<int> rmap(A.rows(), -1), cmap(A.cols(), -1);
  int nr = 0, nc = 0;
  for (int i = 0; i < A.rows(); ++i)
    if (row_mask[i])
      rmap[i] = nr++;
  for (int j = 0; j < A.cols(); ++j)
    if (col_mask[j])
      cmap[j] = nc++;
  std::vector<Eigen::Triplet<double>> t;
  for (int j = 0; j < A.outerSize(); ++j)
    for (SpMat::InnerIterator it(A, j); it; ++it)
      if (rmap[it.row()] >= 0 and cmap[it.col()] >= 0)
        t.emplace_back(rmap[it.row()], cmap[it.col()], it.value());
  SpMat B(nr, nc);
  B.setFromTriplets(t.begin(), t.end());
  return B;
}

SpdSolver::SpdSolver(const SpMat& A)
    : _llt(std::make_unique<Eigen::CholmodSupernodalLLT<SpMat>>())
{
  _llt->compute(A);
  if (_llt->info() != Eigen::Success)
    throw Error("sparse Cholesky factorization failed (matrix not SPD)");
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b) const
{
  return _llt->solve(b);
}

Eigen::MatrixXd SpdSolver::solve(const Eigen::MatrixXd& B) const
{
  return _llt->solve(B);
}

LuSolver::LuSolver(const SpMat& A)
    : _A(A), _lu(std::make_unique<Eigen::UmfPackLU<SpMat>>())
{
  _A.makeCompressed();
  _lu->compute(_A);
  if (_lu->info() != Eigen::Success)
    throw Error("sparse LU factorization failed (singular matrix)");
}

Eigen::VectorXd LuSolver::solve(const Eigen::VectorXd& b) const
{
  Eigen::VectorXd x = _lu->solve(b);
  if (_lu->info() != Eigen::Success)
    throw Error("sparse LU solve failed");
  return x;
}

Eigen::MatrixXd LuSolver::solve(const Eigen::MatrixXd& B) const
{
  Eigen::MatrixXd X(B.rows(), B.cols());
  for (int j = 0; j < B.cols(); ++j)
    X.col(j) = solve(Eigen::VectorXd(B.col(j)));
  return X;
}

SpMat assemble_blocks(int rows, int cols,
                      const std::vector<std::tuple<int, int, SpMat>>& blocks)
{
  std::vector<Eigen::Triplet<double>> t;
  for (const auto& [r0, c0, B] : blocks)
    for (int j = 0; j < B.outerSize(); ++j)
      for (SpMat::InnerIterator it(B, j); it; ++it)
        t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
  SpMat A(rows, cols);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

Eigen::VectorXd generalized_eigenvalues(const Eigen::MatrixXd& A,
                                        const Eigen::MatrixXd& B)
{
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success)
    throw Error("boundary Gram is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd T = L.triangularView<Eigen::Lower>().solve(A);
  T = L.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
  T = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double max_generalized_eigenvalue(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& B)
{
  Eigen::VectorXd ev = generalized_eigenvalues(A, B);
  return ev.size() ? ev[ev.size() - 1] : 0.0;
}

} // namespace tracelift::linalg
