#pragma once

#include "tracelift/fe_space.h"
#include "tracelift/linalg.h"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace tracelift
{

enum class NormKind
{
  l2,
  h1,
  hdiv,
  hcurl,
  slobodetskij,          // L2 + Slobodetskij seminorm of order s
  slobodetskij_seminorm, // seminorm only; constants in the kernel
  hminus_half,           // dual norm through a Neumann problem
  hminus_half_par_div    // H^{-1/2}_par(div_G) surrogate
};

std::string to_string(NormKind k);

/// Symmetric positive (semi)definite matrix realizing a squared norm on a
/// discrete space. Volume Grams are sparse; boundary Grams are dense.
struct NormOperator
{
  NormKind kind = NormKind::l2;
  SpacePtr space;
  double s = 0.0;     // Sobolev order for the Slobodetskij kinds
  int resolution = 0; // auxiliary refinement levels for the dual kinds
  bool sparse = true;
  SpMat sparse_matrix;
  Eigen::MatrixXd dense_matrix;
  nlohmann::json metadata;

  int dim() const;
  Eigen::MatrixXd dense() const;
  double norm_sq(const Eigen::VectorXd& c) const;
  double norm(const Eigen::VectorXd& c) const;
};

/// int phi_i phi_j (value components dotted).
SpMat mass_matrix(const FESpace& space);
/// int D phi_i . D phi_j for a derivative supported by the space.
SpMat derivative_matrix(const FESpace& space, Deriv d);

/// L2, H1 (Lagrange), H(div) (RaviartThomas, SurfaceRT) and H(curl)
/// (Nedelec1) Grams. H1 on SurfaceLagrange uses the tangential gradient.
NormOperator gram(SpacePtr space, NormKind kind);

/// Galerkin Gram of int int (u(x)-u(y))(v(x)-v(y)) / |x-y|^{2+2s} on a
/// scalar boundary space, with the L2 Gram added unless seminorm_only.
/// Touching triangle pairs use Sauter-Schwab rules with `order` Gauss
/// points per direction. Throws if the space is larger than dense_limit.
NormOperator slobodetskij_gram(SpacePtr space, double s,
                               bool seminorm_only = false,
                               int dense_limit = 2000, int order = 6);

/// Uniform r-fold refinement of a surface's volume mesh, with the coarse
/// boundary triangle containing each fine boundary triangle.
struct AuxiliaryRefinement
{
  std::shared_ptr<const SurfaceMesh> coarse;
  std::shared_ptr<const Mesh> fine;
  std::shared_ptr<const SurfaceMesh> fine_surface;
  std::vector<int> coarse_triangle;
  std::vector<int> coarse_cell; // ancestor of every fine cell

  AuxiliaryRefinement(std::shared_ptr<const SurfaceMesh> coarse, int r);
};

/// B(i, j) = int_G a_i . b_j for spaces on the same boundary, or with `a`
/// on the fine boundary of `aux` and `b` on its coarse boundary.
SpMat surface_pairing(const FESpace& a, const FESpace& b,
                      const AuxiliaryRefinement* aux = nullptr);

/// ||g||_{-1/2}^2 := (N_h g0)^T K^{-1} (N_h g0) + (int g)^2 / |G|, where g0
/// is the mean-free part of g, K the Neumann stiffness of Lagrange P_{k+2}
/// on the r-fold refined mesh and N_h the boundary load. The constant
/// part gets exactly the dual norm of constants against the full H^{1/2}
/// norm, sqrt(|G|) for g = 1.
class NeumannEnergy
{
public:
  NeumannEnergy(SpacePtr M, int r = 2);

  NormOperator gram() const;
  /// Squared norm of a boundary function; the field receives coarse
  /// triangle indices.
  double norm_sq(const Field& g, int quad_degree = -1) const;

  const AuxiliaryRefinement& aux() const { return *_aux; }
  SpacePtr aux_space() const { return _W; }
  double mean_weight() const { return 1.0 / _area; }

private:
  Eigen::VectorXd load(const Field& g, int deg, double& mean) const;
  Eigen::VectorXd energy_solve(const Eigen::VectorXd& b) const;

  SpacePtr _M;
  int _r;
  std::shared_ptr<const AuxiliaryRefinement> _aux;
  SpacePtr _W;
  double _area = 0.0;
  Eigen::VectorXd _trace_integrals; // int_G psi_j
  std::unique_ptr<linalg::SpdSolver> _solver; // K with dof 0 removed
};

/// ||r||^2 := sum_c T_c^T (K + M)^{-1} T_c + (div_G r)^T G (div_G r): dual
/// of tangential traces of vector H1 fields (Lagrange P_{k+2} on the
/// r-fold refined mesh) plus the H^{-1/2} norm of the surface divergence.
class TangentialDual
{
public:
  TangentialDual(SpacePtr R, int r = 2);

  NormOperator gram() const;
  /// Squared norm of a tangential field with surface divergence div_r;
  /// both fields receive coarse triangle indices.
  double norm_sq(const Field& r, const Field& div_r,
                 int quad_degree = -1) const;

  SpacePtr divergence_space() const { return _M; }

private:
  SpacePtr _R;
  SpacePtr _M;
  int _r;
  NeumannEnergy _div;
  std::unique_ptr<linalg::SpdSolver> _solver; // K + M
};

NormOperator hminus_half_gram(SpacePtr M, int r = 2);
NormOperator hminus_half_par_div_gram(SpacePtr R, int r = 2);

/// sup_v (g, v) / ||v||: sqrt(g^T B^T A^{-1} B g) with A = primal Gram and
/// B = pairing (primal dim x g dim).
double dual_norm(const Eigen::VectorXd& g, const NormOperator& primal,
                 const SpMat& pairing);

namespace detail
{

/// Quadrature for int_T int_T f(x, y) over the reference triangle
/// T = {0 <= x2 <= x1 <= 1} twice. `shared` = 3 (identical), 2 (common
/// edge x2 = y2 = 0) or 1 (common vertex at the origin).
struct PairRule
{
  std::vector<Eigen::Vector2d> x, y;
  std::vector<double> w;
};

const PairRule& sauter_schwab(int shared, int order);

} // namespace detail

} // namespace tracelift
