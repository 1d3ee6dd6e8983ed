#pragma once

#include "tracelift/mesh.h"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tracelift
{

enum class Family
{
  Lagrange,        // W_h, continuous P_{k+1}
  DG,              // U_h, piecewise P_k
  RaviartThomas,   // V_h
  Nedelec1,        // N_h, first kind
  SurfaceDG,       // M_h, piecewise P_k on the boundary
  SurfaceRT,       // R_h, tangential traces of N_h
  SurfaceLagrange  // P_h, continuous P_{k+1} on the boundary
};

std::string to_string(Family f);
Family family_from_string(const std::string& s);

/// Quantity produced by FESpace::eval.
enum class Deriv
{
  Value,
  Grad,     // scalar volume spaces
  Div,      // RaviartThomas
  Curl,     // Nedelec1
  SurfGrad, // SurfaceLagrange, tangential gradient
  SurfCurl, // SurfaceLagrange, grad_G(phi) x n
  SurfDiv   // SurfaceRT
};

/// DOF functionals of one entity: l_i(v) = sum_j weights(i, j) * v_j where
/// v stacks the value components of v at `points` (point-major).
struct LocalDofs
{
  std::vector<Vec3> points;
  Eigen::MatrixXd weights;
};

/// Finite element space on a volume mesh or its boundary triangulation.
///
/// For vector families the local basis is obtained by inverting the DOF
/// functionals on a monomial span in scaled coordinates (x - x_K) / h_K.
/// Entity DOF functionals use global orientation (sorted vertex order,
/// global face normals), so shared DOFs need no sign bookkeeping.
class FESpace
{
public:
  static std::shared_ptr<const FESpace>
  create(std::shared_ptr<const Mesh> mesh, Family family, int k,
         bool mean_zero = false);
  static std::shared_ptr<const FESpace>
  create(std::shared_ptr<const SurfaceMesh> surface, Family family, int k,
         bool mean_zero = false);

  Family family() const { return _family; }
  /// Index k of the discrete complex (Lagrange spaces have degree k+1).
  int degree() const { return _k; }
  /// Polynomial degree of the scalar/vector components.
  int poly_degree() const;
  bool mean_zero() const { return _mean_zero; }
  bool is_surface() const { return _surface != nullptr; }
  bool is_vector() const;
  /// Number of value components (1 or 3; surface vectors are 3D tangential).
  int value_size() const { return is_vector() ? 3 : 1; }

  int dim() const { return _ndofs; }
  int num_entities() const { return static_cast<int>(_dofs.size()); }
  int num_local_dofs() const { return _nloc; }
  const std::vector<int>& entity_dofs(int e) const { return _dofs[e]; }

  const Mesh& mesh() const { return *_mesh; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return _mesh; }
  const SurfaceMesh& surface() const;
  std::shared_ptr<const SurfaceMesh> surface_ptr() const { return _surface; }

  /// Physical point of entity e at barycentric coordinates (4 for cells,
  /// 3 for triangles).
  Vec3 point(int e, const Eigen::VectorXd& bary) const;
  double entity_measure(int e) const;
  double entity_diameter(int e) const;

  /// Basis quantities on entity e at physical points; rows are
  /// point-major components, columns local basis functions.
  Eigen::MatrixXd eval(int e, const std::vector<Vec3>& x,
                       Deriv d = Deriv::Value) const;
  int deriv_size(Deriv d) const;

  LocalDofs local_dofs(int e) const;

  /// DOFs whose functionals live on the boundary (essential conditions).
  const std::vector<char>& boundary_dofs() const { return _boundary; }

  /// a_i = integral of basis function i over the domain of the space;
  /// defined for scalar spaces.
  const Eigen::VectorXd& integrals() const { return _integrals; }

  /// Domain measure (volume or total boundary area).
  double domain_measure() const;

  /// Quadrature degree used for DOF functionals.
  int dof_quadrature_degree() const { return 2 * _k + 3; }

  /// Global key of a Lagrange node (sorted multiset of vertex ids) for
  /// the local dof i of entity e; -1 for other families.
  std::uint64_t lagrange_key(int e, int i) const;
  /// Global dof of a Lagrange node key; -1 if absent.
  int lagrange_dof(std::uint64_t key) const;

private:
  FESpace() = default;
  void build();
  void build_lagrange();
  void build_vector();
  void build_dg();
  void compute_integrals();

  Eigen::MatrixXd eval_prebasis(int e, const std::vector<Vec3>& x,
                                Deriv d) const;
  Eigen::MatrixXd eval_lagrange(int e, const std::vector<Vec3>& x,
                                Deriv d) const;
  Eigen::MatrixXd eval_dg(int e, const std::vector<Vec3>& x, Deriv d) const;
  Eigen::VectorXd barycentric(int e, const Vec3& x) const;

  std::shared_ptr<const Mesh> _mesh;
  std::shared_ptr<const SurfaceMesh> _surface;
  Family _family = Family::DG;
  int _k = 0;
  bool _mean_zero = false;
  int _ndofs = 0;
  int _nloc = 0;

  std::vector<std::vector<int>> _dofs;
  std::vector<char> _boundary;
  Eigen::VectorXd _integrals;

  // per entity geometry
  std::vector<Vec3> _x0;
  std::vector<Eigen::Matrix3d> _bary_map; // rows: grad lambda_1..lambda_d
  std::vector<Vec3> _centroid;
  std::vector<double> _h;
  std::vector<Eigen::MatrixXd> _coeffs; // vector families: prebasis -> basis

  // Lagrange
  std::vector<std::array<int, 4>> _lattice;
  std::vector<std::pair<std::uint64_t, int>> _key_lookup;
  std::vector<std::vector<std::uint64_t>> _keys;
};

using SpacePtr = std::shared_ptr<const FESpace>;

/// Coefficient vector bound to a space.
class FEFunction
{
public:
  FEFunction(SpacePtr space, Eigen::VectorXd coeffs);
  explicit FEFunction(SpacePtr space);

  const FESpace& space() const { return *_space; }
  SpacePtr space_ptr() const { return _space; }
  const Eigen::VectorXd& coeffs() const { return _coeffs; }

private:
  SpacePtr _space;
  Eigen::VectorXd _coeffs;
};

/// Field evaluated at physical point x on entity e (cell or triangle).
using Field = std::function<Eigen::VectorXd(const Vec3& x, int e)>;

Field scalar_field(std::function<double(const Vec3&)> f);
Field vector_field(std::function<Vec3(const Vec3&)> f);

/// Applies the DOF functionals of the space to a field (canonical
/// interpolant). For RaviartThomas this is the projection Pi; for DG it is
/// the L2 projection.
Eigen::VectorXd interpolate(const FESpace& space, const Field& f);

FEFunction rt_interpolate(SpacePtr space, const Field& v);
FEFunction l2_project_dg(SpacePtr space, const Field& f);

/// Value of u at barycentric point `ref` of entity e.
Eigen::VectorXd evaluate(const FEFunction& u, int e,
                         const Eigen::VectorXd& ref);

/// Orthonormal P^k bases in barycentric monomials on the unit-measure
/// reference simplex; rows are basis functions, columns monomials
/// {1, lambda_1, ..., lambda_d} (k <= 1).
const Eigen::MatrixXd& orthonormal_simplex_basis(int dim, int k);

/// Quadrature points and weights (measure included) on entity e.
void entity_quadrature(const FESpace& space, int e, int degree,
                       std::vector<Vec3>& x, std::vector<double>& w);

} // namespace tracelift
