#pragma once

#include "tracelift/extension_ops.h"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tracelift
{

/// b_i = int D phi_i . f over the entities of the space.
Eigen::VectorXd load_vector(const FESpace& space, const Field& f,
                            Deriv d = Deriv::Value, int quad_degree = -1);

/// (int |D u - exact|^2)^(1/2); `exact` receives the entity index.
double error_norm(const FEFunction& u, const Field& exact,
                  Deriv d = Deriv::Value, int quad_degree = -1);

/// Projection in the Gram of `kind` (l2, hdiv, hcurl, h1). `value` is the
/// field, `deriv` its div / curl / gradient (unused for l2).
Eigen::VectorXd gram_projection(SpacePtr space, NormKind kind,
                                const Field& value, const Field& deriv = {});

struct BVPSolution
{
  std::string problem; // "mixed_neumann" or "curlcurl"
  std::string form;    // bilinear form in words
  FEFunction primal;   // u_h in U_h or N_h
  std::optional<FEFunction> flux; // sigma_h (mixed only)
  Eigen::VectorXd datum; // g_h or r_h
  double galerkin_residual = 0.0; // relative, homogeneous-trace test space
  double trace_residual = 0.0;    // max |trace - datum|
};

/// sigma = grad u, -div sigma = f in Omega, sigma.n = g on the boundary,
/// int u = 0. `f` is L2-projected onto U_h.
BVPSolution solve_mixed_neumann(std::shared_ptr<const Mesh> mesh, int k,
                                const Field& f, const FEFunction& g);

/// int curl u . curl v + u . v = int f . v for v with zero tangential trace,
/// u x n = r imposed on the boundary DOFs.
BVPSolution solve_curlcurl(std::shared_ptr<const Mesh> mesh, int k,
                           const Field& f, const FEFunction& r);

enum class ProblemKind
{
  mixed,
  curlcurl
};

std::string to_string(ProblemKind p);

/// Smooth solution with the fields needed by the error study.
///   mixed:    u scalar, flux = grad u, flux_div = div grad u, f = -lap u
///   curlcurl: u vector, flux = curl u, f = curl curl u + u
struct ExactSolution
{
  ProblemKind problem = ProblemKind::mixed;
  Field u, flux, flux_div, f;
};

/// mixed: u = sin(pi x) cos(pi y). curlcurl: u = (sin pi y, sin pi z,
/// sin pi x), divergence-free with curl curl u = pi^2 u.
ExactSolution manufactured(ProblemKind p);

struct ErrorStudyRow
{
  int level = 0;
  double h_max = 0.0;
  int ndof = 0;
  double eps = 0.0;
  double total_error = 0.0;  // X-norm error of the discrete solution
  double l2_error = 0.0;     // mixed: flux in L2; curlcurl: u in L2
  double best_approx = 0.0;  // X-norm distance to the Gram projection
  double datum_error = 0.0;  // |g - g_h| in the boundary norm
  double noise_norm = 0.0;   // |eps * noise| in the boundary norm
  double effectivity = 0.0;  // total / (best + datum)
};

struct ErrorStudyTable
{
  ProblemKind problem = ProblemKind::mixed;
  int k = 0;
  int resolution = 0;
  std::vector<ErrorStudyRow> rows;

  std::vector<ErrorStudyRow> at_eps(double eps) const;
  /// max / min effectivity over levels at one eps.
  double effectivity_drift(double eps) const;
  /// Least-squares slope of log(total) against log(eps) on one level,
  /// over the eps >= eps_min.
  double noise_slope(int level, double eps_min) const;
  /// Least-squares slope of log(column) against log(h_max) at eps = 0,
  /// levels >= min_level.
  double convergence_order(const std::string& column, int min_level = 0) const;
  nlohmann::json to_json() const;
  std::string csv() const;
};

/// For every mesh and every eps, solves with g_h = Pi g + eps * noise
/// (noise: fixed i.i.d. normal M_h / R_h coefficients per level, mean-free
/// for the mixed problem, scaled to unit L2(boundary) norm) and records the
/// errors. Boundary norms use resolution r.
ErrorStudyTable decoupled_error_study(
    ProblemKind problem, const std::vector<std::shared_ptr<const Mesh>>& meshes,
    int k, const std::vector<double>& eps, unsigned seed, int r = 1,
    const std::optional<ExactSolution>& exact = std::nullopt);

/// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace tracelift
