#pragma once

#include "tracelift/boundary_norms.h"
#include "tracelift/complex_ops.h"
#include "tracelift/linalg.h"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace tracelift
{

/// The spaces of the discrete complex on one mesh and its boundary.
struct ComplexSpaces
{
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const SurfaceMesh> surface;
  int k = 0;
  SpacePtr W, N, V, U; // Lagrange, Nedelec1, RaviartThomas, DG
  SpacePtr P, R, M;    // boundary: Lagrange, tangential traces, normal traces

  static std::shared_ptr<const ComplexSpaces>
  create(std::shared_ptr<const Mesh> mesh, int k);
};

/// For a trace matrix that selects volume DOFs (one unit entry per row),
/// the surface DOF of every volume DOF, or -1 for interior DOFs.
std::vector<int> selection_map(const SpMat& trace);

/// Error raised by a pipeline stage whose residual exceeds 1e-8.
class StageError : public Error
{
public:
  StageError(int stage, const std::string& what)
      : Error("stage " + std::to_string(stage) + ": " + what), _stage(stage)
  {
  }
  int stage() const { return _stage; }

private:
  int _stage;
};

/// Mixed Neumann problem with sigma = grad u, -div sigma = f:
///   (sigma, eta) + (u, div eta) = 0        for eta in V_h, eta.n = 0
///   -(div sigma, w)              = (f, w)  for w in U_h
///   sigma.n = g on the boundary (boundary DOFs copied from M_h), int u = 0.
/// The saddle matrix is factorized once (UMFPACK).
class MixedNeumannSolver
{
public:
  explicit MixedNeumannSolver(std::shared_ptr<const ComplexSpaces> spaces);

  /// g in M_h coefficients, f in U_h coefficients (L2 moments). Throws if
  /// int f + int g != 0 beyond 1e-9 relative.
  Eigen::VectorXd solve(const Eigen::VectorXd& g, const Eigen::VectorXd& f,
                        Eigen::VectorXd* u = nullptr) const;

  const ComplexSpaces& spaces() const { return *_s; }
  const SpMat& div() const { return _D; }
  const SpMat& normal_trace() const { return _T; }

private:
  std::shared_ptr<const ComplexSpaces> _s;
  SpMat _D, _T, _Mv;
  std::vector<int> _bmap, _interior;
  SpMat _MIB, _DB;
  std::unique_ptr<linalg::LuSolver> _lu;
};

/// Lifting of normal traces through the mixed Neumann problem.
class RtExtension
{
public:
  explicit RtExtension(std::shared_ptr<const ComplexSpaces> spaces);

  /// g in M_h with zero mean: div sigma = 0, sigma.n = g.
  Eigen::VectorXd extend_meanzero(const Eigen::VectorXd& g) const;
  /// Any g: the mean is extended with the constant source that makes the
  /// problem compatible, so div sigma = (int g) / |Omega|.
  Eigen::VectorXd extend(const Eigen::VectorXd& g) const;

  const MixedNeumannSolver& solver() const { return _solver; }

private:
  MixedNeumannSolver _solver;
};

/// Minimal L2-norm right inverse of curl on divergence-free V_h fields:
///   (curl w, curl z) + (grad p, z) = (v, curl z),  (w, grad q) = 0,
/// with one Lagrange DOF of p pinned.
class CurlRightInverse
{
public:
  explicit CurlRightInverse(std::shared_ptr<const ComplexSpaces> spaces);

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  const SpMat& curl() const { return _C; }
  const SpMat& grad() const { return _G; }

private:
  std::shared_ptr<const ComplexSpaces> _s;
  SpMat _C, _G, _D, _rhs;
  std::unique_ptr<linalg::LuSolver> _lu;
};

/// phi in P_h with curl_G phi = m and int phi = 0, for m in R_h with
/// div_G m = 0 (least squares in L2(G), bordered with the mean).
class SurfacePotential
{
public:
  explicit SurfacePotential(std::shared_ptr<const ComplexSpaces> spaces);

  Eigen::VectorXd apply(const Eigen::VectorXd& m,
                        double* residual = nullptr) const;

  const SpMat& surf_curl() const { return _SC; }

private:
  std::shared_ptr<const ComplexSpaces> _s;
  SpMat _SC, _SD, _MR, _rhs;
  std::unique_ptr<linalg::LuSolver> _lu;
};

/// Discrete harmonic extension P_h -> W_h (boundary DOFs copied).
class HarmonicLift
{
public:
  explicit HarmonicLift(std::shared_ptr<const ComplexSpaces> spaces);

  Eigen::VectorXd apply(const Eigen::VectorXd& phi) const;

private:
  std::shared_ptr<const ComplexSpaces> _s;
  std::vector<int> _bmap, _interior;
  SpMat _KIB;
  std::unique_ptr<linalg::SpdSolver> _solver;
};

/// Intermediate quantities of one Nedelec extension.
struct NedelecStages
{
  Eigen::VectorXd g;   // div_G r
  Eigen::VectorXd v;   // RT extension of g
  Eigen::VectorXd w;   // curl right inverse of v
  Eigen::VectorXd m;   // r - gamma_t w
  Eigen::VectorXd phi; // surface potential of m
  Eigen::VectorXd u;   // harmonic lift of phi
  double potential_residual = 0.0;
};

/// Lifting of tangential traces:
/// r -> w_h + grad u_h with the six stages of NedelecStages.
class NedelecExtension
{
public:
  explicit NedelecExtension(std::shared_ptr<const ComplexSpaces> spaces);

  Eigen::VectorXd extend(const Eigen::VectorXd& r,
                         NedelecStages* stages = nullptr) const;

  const RtExtension& rt() const { return _rt; }
  const SpMat& tangential_trace() const { return _Gt; }
  const SpMat& surf_div() const { return _SD; }

private:
  std::shared_ptr<const ComplexSpaces> _s;
  RtExtension _rt;
  CurlRightInverse _curl;
  SurfacePotential _pot;
  HarmonicLift _lift;
  SpMat _Gt, _SD;
};

// Function-level entry points. Each builds the needed factorization.
FEFunction extend_rt_meanzero(const FEFunction& g);
FEFunction extend_rt(const FEFunction& g);
FEFunction curl_right_inverse(const FEFunction& v);
FEFunction surface_scalar_potential(const FEFunction& m);
FEFunction discrete_h1_lift(const FEFunction& phi);
FEFunction extend_nedelec(const FEFunction& r);

/// RT extension computed with RaviartThomas of degree 1 on the r-fold
/// refined mesh and mapped back with the canonical interpolant of the
/// coarse space (cross-check of the same-mesh construction). Coarse k = 0
/// only; the fine fluxes are integrated exactly over the fine faces.
Eigen::VectorXd extend_rt_oversolve(const ComplexSpaces& coarse,
                                    const Eigen::VectorXd& g, int r);

enum class ExtensionKind
{
  rt,
  nedelec
};

std::string to_string(ExtensionKind k);

/// sqrt of the largest eigenvalue of E^T A E x = lambda B x.
double operator_norm(const Eigen::MatrixXd& E, const SpMat& A,
                     const Eigen::MatrixXd& B);

struct NormEstimate
{
  double C_L = 0.0;
  int ndof_volume = 0;
  int ndof_trace = 0; // dimension of the data space (M_h^0 or R_h)
  double trace_residual = 0.0;    // max relative |gamma E e - e|
  double identity_residual = 0.0; // rt: div; nedelec: curl E r = RT ext
};

/// Builds E column by column on an orthonormal basis of M_h^0 (rt) or on
/// the R_h basis (nedelec), with the H(div)/H(curl) Gram as target norm and
/// the H^{-1/2} / H^{-1/2}_par(div) realization (resolution r) as data norm.
NormEstimate extension_norm_estimate(ExtensionKind which,
                                     std::shared_ptr<const Mesh> mesh, int k,
                                     int r);

struct ExtensionLevel
{
  int level = 0;
  int ndof_volume = 0;
  int ndof_trace = 0;
  double h_min = 0.0;
  double h_max = 0.0;
  double shape_reg = 0.0;
  double C_L = 0.0;
  double trace_residual = 0.0;
  double identity_residual = 0.0;
  double wall_time_s = 0.0;
};

struct ExtensionReport
{
  std::string family;
  ExtensionKind which = ExtensionKind::rt;
  int k = 0;
  int resolution = 0;
  std::vector<ExtensionLevel> levels;

  double max_over_min() const;
  /// Least-squares slope of C_L against the level index.
  double slope() const;
  nlohmann::json to_json() const;
  std::string csv() const;
};

/// One estimate per mesh; wall times are recorded only on request so that
/// reports stay byte-identical across runs.
ExtensionReport extension_study(ExtensionKind which,
                                const std::vector<std::shared_ptr<const Mesh>>& meshes,
                                const std::string& family, int k, int r,
                                bool record_timings = false);

/// Least-squares slope of y against 0, 1, ..., n-1.
double trend_slope(const std::vector<double>& y);

} // namespace tracelift
