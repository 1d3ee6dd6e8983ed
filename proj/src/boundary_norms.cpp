#include "tracelift/boundary_norms.h"

#include "tracelift/complex_ops.h"
#include "tracelift/quadrature.h"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>

namespace tracelift
{

std::string to_string(NormKind k)
{
  switch (k)
  {
  case NormKind::l2: return "l2";
  case NormKind::h1: return "h1";
  case NormKind::hdiv: return "hdiv";
  case NormKind::hcurl: return "hcurl";
  case NormKind::slobodetskij: return "slobodetskij";
  case NormKind::slobodetskij_seminorm: return "slobodetskij_seminorm";
  case NormKind::hminus_half: return "hminus_half";
  case NormKind::hminus_half_par_div: return "hminus_half_par_div";
  }
  return "unknown";
}

int NormOperator::dim() const
{
  return sparse ? static_cast<int>(sparse_matrix.rows())
                : static_cast<int>(dense_matrix.rows());
}

Eigen::MatrixXd NormOperator::dense() const
{
  return sparse ? Eigen::MatrixXd(sparse_matrix) : dense_matrix;
}

double NormOperator::norm_sq(const Eigen::VectorXd& c) const
{
  if (c.size() != dim())
    throw Error("norm_sq: coefficient vector has wrong length");
  return sparse ? c.dot(sparse_matrix * c) : c.dot(dense_matrix * c);
}

double NormOperator::norm(const Eigen::VectorXd& c) const
{
  return std::sqrt(std::max(norm_sq(c), 0.0));
}

namespace
{

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat local_products(const FESpace& sp, Deriv d, int deg)
{
  const int rs = d == Deriv::Value ? sp.value_size() : sp.deriv_size(d);
  Triplets t;
  t.reserve(static_cast<std::size_t>(sp.num_entities()) * sp.num_local_dofs()
            * sp.num_local_dofs());
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int e = 0; e < sp.num_entities(); ++e)
  {
    entity_quadrature(sp, e, deg, x, w);
    Eigen::MatrixXd B = sp.eval(e, x, d);
    Eigen::MatrixXd Bw = B;
    for (std::size_t q = 0; q < w.size(); ++q)
      Bw.middleRows(rs * q, rs) *= w[q];
    const Eigen::MatrixXd L = B.transpose() * Bw;
    const auto& dofs = sp.entity_dofs(e);
    for (int i = 0; i < L.rows(); ++i)
      for (int j = 0; j < L.cols(); ++j)
        t.emplace_back(dofs[i], dofs[j], L(i, j));
  }
  SpMat A(sp.dim(), sp.dim());
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

NormOperator make_sparse(SpacePtr space, NormKind kind, SpMat A)
{
  NormOperator op;
  op.kind = kind;
  op.space = std::move(space);
  op.sparse = true;
  op.sparse_matrix = std::move(A);
  op.metadata = {{"kind", to_string(kind)},
                 {"family", to_string(op.space->family())},
                 {"k", op.space->degree()},
                 {"dim", op.space->dim()}};
  return op;
}

// Physical quadrature on triangle t of a surface mesh.
void triangle_rule(const SurfaceMesh& s, int t, int deg, std::vector<Vec3>& x,
                   std::vector<double>& w)
{
  const auto& r = quadrature::triangle(deg);
  const auto& tri = s.triangle(t);
  const auto& V = s.mesh().vertices();
  x.resize(r.size());
  w.resize(r.size());
  for (std::size_t q = 0; q < r.size(); ++q)
  {
    x[q] = r.points[q][0] * V[tri[0]] + r.points[q][1] * V[tri[1]]
           + r.points[q][2] * V[tri[2]];
    w[q] = r.weights[q] * s.area(t);
  }
}

// Values of a space at points of a fine boundary triangle: surface spaces
// are evaluated on their triangle, volume spaces on the owner cell.
Eigen::MatrixXd boundary_values(const FESpace& sp, const SurfaceMesh& fine,
                                int tf, int tc, const std::vector<Vec3>& x,
                                bool on_coarse)
{
  if (sp.is_surface())
    return sp.eval(on_coarse ? tc : tf, x);
  return sp.eval(fine.owner_cell(tf), x);
}

// B(i, j) = int a_i * (component `comp` of b_j), or the full dot product
// when comp < 0.
SpMat pairing_impl(const FESpace& a, const FESpace& b,
                   const AuxiliaryRefinement* aux, int comp)
{
  const SurfaceMesh* fine = nullptr;
  if (aux)
    fine = aux->fine_surface.get();
  else if (b.is_surface())
    fine = &b.surface();
  else
    fine = &a.surface();
  if (comp < 0 and a.value_size() != b.value_size())
    throw Error("surface_pairing: value sizes differ");
  if (aux)
  {
    if (!b.is_surface() or b.surface_ptr() != aux->coarse)
      throw Error("surface_pairing: second space must live on the coarse boundary");
    if (a.mesh_ptr() != aux->fine)
      throw Error("surface_pairing: first space must live on the fine mesh");
  }
  else if (a.mesh_ptr() != b.mesh_ptr())
    throw Error("surface_pairing: spaces live on different meshes");

  const int deg = a.poly_degree() + b.poly_degree();
  const int va = comp < 0 ? a.value_size() : 1;
  const int vb = b.value_size();
  Triplets t;
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int tf = 0; tf < fine->num_triangles(); ++tf)
  {
    const int tc = aux ? aux->coarse_triangle[tf] : tf;
    triangle_rule(*fine, tf, deg, x, w);
    const Eigen::MatrixXd A = boundary_values(a, *fine, tf, tc, x, false);
    const Eigen::MatrixXd B = boundary_values(b, *fine, tf, tc, x, true);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(A.cols(), B.cols());
    for (std::size_t q = 0; q < w.size(); ++q)
    {
      if (comp < 0)
        L += w[q] * A.middleRows(va * q, va).transpose()
             * B.middleRows(vb * q, vb);
      else
        L += w[q] * A.row(q).transpose() * B.row(vb * q + comp);
    }
    const auto& ra = a.entity_dofs(a.is_surface() ? tf : fine->owner_cell(tf));
    const auto& rb = b.entity_dofs(tc);
    for (int i = 0; i < L.rows(); ++i)
      for (int j = 0; j < L.cols(); ++j)
        if (L(i, j) != 0.0)
          t.emplace_back(ra[i], rb[j], L(i, j));
  }
  SpMat P(a.dim(), b.dim());
  P.setFromTriplets(t.begin(), t.end());
  return P;
}

// Column blocks of B^T S^{-1} B.
template <class Solver>
Eigen::MatrixXd inverse_form(const Solver& S, const SpMat& B)
{
  const int n = static_cast<int>(B.cols());
  Eigen::MatrixXd H(n, n);
  const int block = 128;
  for (int j0 = 0; j0 < n; j0 += block)
  {
    const int nb = std::min(block, n - j0);
    Eigen::MatrixXd rhs = Eigen::MatrixXd(B.middleCols(j0, nb));
    Eigen::MatrixXd X = S.solve(rhs);
    H.middleCols(j0, nb) = B.transpose() * X;
  }
  return 0.5 * (H + H.transpose());
}

SpMat drop_first_row(const SpMat& A)
{
  return A.bottomRows(A.rows() - 1);
}

} // namespace

SpMat mass_matrix(const FESpace& space)
{
  return local_products(space, Deriv::Value, 2 * space.poly_degree());
}

SpMat derivative_matrix(const FESpace& space, Deriv d)
{
  return local_products(space, d, 2 * space.poly_degree());
}

NormOperator gram(SpacePtr space, NormKind kind)
{
  const Family f = space->family();
  SpMat A = mass_matrix(*space);
  switch (kind)
  {
  case NormKind::l2:
    break;
  case NormKind::h1:
    if (f == Family::Lagrange)
      A += derivative_matrix(*space, Deriv::Grad);
    else if (f == Family::SurfaceLagrange)
      A += derivative_matrix(*space, Deriv::SurfGrad);
    else
      throw Error("H1 Gram needs a Lagrange space");
    break;
  case NormKind::hdiv:
    if (f == Family::RaviartThomas)
      A += derivative_matrix(*space, Deriv::Div);
    else if (f == Family::SurfaceRT)
      A += derivative_matrix(*space, Deriv::SurfDiv);
    else
      throw Error("H(div) Gram needs a RaviartThomas space");
    break;
  case NormKind::hcurl:
    if (f != Family::Nedelec1)
      throw Error("H(curl) Gram needs a Nedelec1 space");
    A += derivative_matrix(*space, Deriv::Curl);
    break;
  default:
    throw Error("gram: use the dedicated constructor for " + to_string(kind));
  }
  return make_sparse(std::move(space), kind, std::move(A));
}

namespace detail
{

namespace
{

PairRule build_rule(int shared, int order)
{
  std::vector<double> g, gw;
  quadrature::gauss_legendre(order, g, gw);
  PairRule r;
  auto add = [&](double w, Eigen::Vector2d x, Eigen::Vector2d y) {
    r.x.push_back(x);
    r.y.push_back(y);
    r.w.push_back(w);
  };
  using V = Eigen::Vector2d;
  for (int a = 0; a < order; ++a)
    for (int b = 0; b < order; ++b)
      for (int c = 0; c < order; ++c)
        for (int d = 0; d < order; ++d)
        {
          const double xi = g[a], e1 = g[b], e2 = g[c], e3 = g[d];
          const double w0 = gw[a] * gw[b] * gw[c] * gw[d];
          if (shared == 3)
          {
            const double w = w0 * xi * xi * xi * e1 * e1 * e2;
            add(w, xi * V(1, 1 - e1 + e1 * e2), xi * V(1 - e1 * e2 * e3, 1 - e1));
            add(w, xi * V(1 - e1 * e2 * e3, 1 - e1), xi * V(1, 1 - e1 + e1 * e2));
            add(w, xi * V(1, e1 * (1 - e2 + e2 * e3)), xi * V(1 - e1 * e2, e1 * (1 - e2)));
            add(w, xi * V(1 - e1 * e2, e1 * (1 - e2)), xi * V(1, e1 * (1 - e2 + e2 * e3)));
            add(w, xi * V(1 - e1 * e2 * e3, e1 * (1 - e2 * e3)), xi * V(1, e1 * (1 - e2)));
            add(w, xi * V(1, e1 * (1 - e2)), xi * V(1 - e1 * e2 * e3, e1 * (1 - e2 * e3)));
          }
          else if (shared == 2)
          {
            const double w1 = w0 * xi * xi * xi * e1 * e1;
            const double w = w1 * e2;
            add(w1, xi * V(1, e1 * e3), xi * V(1 - e1 * e2, e1 * (1 - e2)));
            add(w, xi * V(1, e1), xi * V(1 - e1 * e2 * e3, e1 * e2 * (1 - e3)));
            add(w, xi * V(1 - e1 * e2, e1 * (1 - e2)), xi * V(1, e1 * e2 * e3));
            add(w, xi * V(1 - e1 * e2 * e3, e1 * e2 * (1 - e3)), xi * V(1, e1));
            add(w, xi * V(1 - e1 * e2 * e3, e1 * (1 - e2 * e3)), xi * V(1, e1 * e2));
          }
          else if (shared == 1)
          {
            const double w = w0 * xi * xi * xi * e2;
            add(w, xi * V(1, e1), xi * e2 * V(1, e3));
            add(w, xi * e2 * V(1, e1), xi * V(1, e3));
          }
          else
            throw Error("sauter_schwab: shared must be 1, 2 or 3");
        }
  return r;
}

} // namespace

const PairRule& sauter_schwab(int shared, int order)
{
  static std::mutex mtx;
  static std::map<std::pair<int, int>, PairRule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(shared, order);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, build_rule(shared, order)).first;
  return it->second;
}

} // namespace detail

NormOperator slobodetskij_gram(SpacePtr space, double s, bool seminorm_only,
                               int dense_limit, int order)
{
  if (!space->is_surface() or space->is_vector())
    throw Error("slobodetskij_gram needs a scalar boundary space");
  if (!(s > 0.0 and s < 1.0))
    throw Error("slobodetskij_gram: order s must lie in (0, 1)");
  const int n = space->dim();
  if (n > dense_limit)
    throw Error("slobodetskij_gram: dimension " + std::to_string(n)
                + " exceeds the dense limit " + std::to_string(dense_limit));
  const SurfaceMesh& S = space->surface();
  const auto& V = S.mesh().vertices();
  const int nt = S.num_triangles();
  const double p = 1.0 + s; // kernel = (|x-y|^2)^{-p}
  auto kernel = [p, s](double r2) {
    return s == 0.5 ? 1.0 / (r2 * std::sqrt(r2)) : std::pow(r2, -p);
  };

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  auto scatter = [&](int t1, int t2, const Eigen::MatrixXd& A11,
                     const Eigen::MatrixXd& A12, const Eigen::MatrixXd& A22,
                     double f) {
    const auto& d1 = space->entity_dofs(t1);
    const auto& d2 = space->entity_dofs(t2);
    for (int i = 0; i < A11.rows(); ++i)
      for (int j = 0; j < A11.cols(); ++j)
        A(d1[i], d1[j]) += f * A11(i, j);
    for (int i = 0; i < A22.rows(); ++i)
      for (int j = 0; j < A22.cols(); ++j)
        A(d2[i], d2[j]) += f * A22(i, j);
    for (int i = 0; i < A12.rows(); ++i)
      for (int j = 0; j < A12.cols(); ++j)
      {
        A(d1[i], d2[j]) += f * A12(i, j);
        A(d2[j], d1[i]) += f * A12(i, j);
      }
  };

  // Regular pairs: tensor rules, denser when the triangles are close.
  struct Local
  {
    std::vector<Vec3> x;
    std::vector<double> w;
    Eigen::MatrixXd phi;
  };
  const int far_deg = 4, near_deg = order + 2;
  std::vector<Local> far(nt), near(nt);
  std::vector<Vec3> centroid(nt);
  for (int t = 0; t < nt; ++t)
  {
    triangle_rule(S, t, far_deg, far[t].x, far[t].w);
    far[t].phi = space->eval(t, far[t].x);
    triangle_rule(S, t, near_deg, near[t].x, near[t].w);
    near[t].phi = space->eval(t, near[t].x);
    const auto& tri = S.triangle(t);
    centroid[t] = (V[tri[0]] + V[tri[1]] + V[tri[2]]) / 3.0;
  }
  auto shared_count = [&](int a, int b) {
    int c = 0;
    for (int i : S.triangle(a))
      for (int j : S.triangle(b))
        c += i == j;
    return c;
  };
  for (int t1 = 0; t1 < nt; ++t1)
    for (int t2 = t1 + 1; t2 < nt; ++t2)
    {
      if (shared_count(t1, t2) > 0)
        continue;
      const double sep = (centroid[t1] - centroid[t2]).norm()
                         / std::max(S.diameter(t1), S.diameter(t2));
      const Local& L1 = sep > 3.0 ? far[t1] : near[t1];
      const Local& L2 = sep > 3.0 ? far[t2] : near[t2];
      Eigen::MatrixXd K(L1.w.size(), L2.w.size());
      for (std::size_t a = 0; a < L1.w.size(); ++a)
        for (std::size_t b = 0; b < L2.w.size(); ++b)
          K(a, b) = L1.w[a] * L2.w[b] * kernel((L1.x[a] - L2.x[b]).squaredNorm());
      const Eigen::VectorXd rs = K.rowwise().sum(), cs = K.colwise().sum();
      const Eigen::MatrixXd A11 = L1.phi.transpose() * rs.asDiagonal() * L1.phi;
      const Eigen::MatrixXd A22 = L2.phi.transpose() * cs.asDiagonal() * L2.phi;
      const Eigen::MatrixXd A12 = -L1.phi.transpose() * K * L2.phi;
      scatter(t1, t2, A11, A12, A22, 2.0);
    }

  // Touching pairs.
  std::vector<std::vector<int>> vtri(V.size());
  for (int t = 0; t < nt; ++t)
    for (int v : S.triangle(t))
      vtri[v].push_back(t);
  for (int t1 = 0; t1 < nt; ++t1)
  {
    std::set<int> nbrs;
    for (int v : S.triangle(t1))
      for (int t2 : vtri[v])
        if (t2 >= t1)
          nbrs.insert(t2);
    for (int t2 : nbrs)
    {
      const int sh = t1 == t2 ? 3 : shared_count(t1, t2);
      // order vertices: shared ones first, in the same order on both
      std::array<int, 3> a = S.triangle(t1), b = S.triangle(t2);
      if (sh < 3)
      {
        std::array<int, 3> na{}, nb{};
        int k = 0;
        for (int i : a)
          if (std::find(b.begin(), b.end(), i) != b.end())
            na[k] = nb[k] = i, ++k;
        int ka = k, kb = k;
        for (int i : a)
          if (std::find(b.begin(), b.end(), i) == b.end())
            na[ka++] = i;
        for (int i : b)
          if (std::find(a.begin(), a.end(), i) == a.end())
            nb[kb++] = i;
        a = na;
        b = nb;
      }
      const auto& rule = detail::sauter_schwab(sh, order);
      const std::size_t nq = rule.w.size();
      std::vector<Vec3> xs(nq), ys(nq);
      auto chi = [&](const std::array<int, 3>& P, const Eigen::Vector2d& u) {
        return Vec3(V[P[0]] + u[0] * (V[P[1]] - V[P[0]]) + u[1] * (V[P[2]] - V[P[1]]));
      };
      for (std::size_t q = 0; q < nq; ++q)
      {
        xs[q] = chi(a, rule.x[q]);
        ys[q] = chi(b, rule.y[q]);
      }
      const double jac = 4.0 * S.area(t1) * S.area(t2);
      Eigen::VectorXd k(nq);
      for (std::size_t q = 0; q < nq; ++q)
        k[q] = rule.w[q] * jac * kernel((xs[q] - ys[q]).squaredNorm());
      const Eigen::MatrixXd P1 = space->eval(t1, xs), P2 = space->eval(t2, ys);
      const Eigen::MatrixXd A11 = P1.transpose() * k.asDiagonal() * P1;
      const Eigen::MatrixXd A22 = P2.transpose() * k.asDiagonal() * P2;
      const Eigen::MatrixXd A12 = -P1.transpose() * k.asDiagonal() * P2;
      scatter(t1, t2, A11, A12, A22, t1 == t2 ? 1.0 : 2.0);
    }
  }

  A = 0.5 * (A + A.transpose());
  if (!seminorm_only)
    A += Eigen::MatrixXd(mass_matrix(*space));
  NormOperator op;
  op.kind = seminorm_only ? NormKind::slobodetskij_seminorm : NormKind::slobodetskij;
  op.space = std::move(space);
  op.s = s;
  op.sparse = false;
  op.dense_matrix = std::move(A);
  op.metadata = {{"kind", to_string(op.kind)},
                 {"family", to_string(op.space->family())},
                 {"k", op.space->degree()},
                 {"dim", n},
                 {"s", s},
                 {"gauss_order", order},
                 {"quadrature", "sauter_schwab"}};
  return op;
}

AuxiliaryRefinement::AuxiliaryRefinement(std::shared_ptr<const SurfaceMesh> c,
                                         int r)
    : coarse(std::move(c))
{
  if (r < 0)
    throw Error("auxiliary refinement depth must be >= 0");
  const Mesh& m0 = coarse->mesh();
  std::vector<int> anc(m0.num_cells());
  for (int i = 0; i < m0.num_cells(); ++i)
    anc[i] = i;
  if (r == 0)
  {
    fine = coarse->mesh_ptr();
    fine_surface = coarse;
  }
  else
  {
    Mesh m = refine(m0, RefineMode::uniform);
    for (int l = 1;; ++l)
    {
      std::vector<int> next(m.num_cells());
      for (int i = 0; i < m.num_cells(); ++i)
        next[i] = anc[m.parents()[i]];
      anc = std::move(next);
      if (l == r)
        break;
      m = refine(m, RefineMode::uniform);
    }
    fine = std::make_shared<const Mesh>(std::move(m));
    fine_surface = std::make_shared<const SurfaceMesh>(fine);
  }

  coarse_cell = anc;
  const auto& Vf = fine->vertices();
  const auto& V0 = m0.vertices();
  coarse_triangle.assign(fine_surface->num_triangles(), -1);
  for (int t = 0; t < fine_surface->num_triangles(); ++t)
  {
    const auto& tri = fine_surface->triangle(t);
    const Vec3 x = (Vf[tri[0]] + Vf[tri[1]] + Vf[tri[2]]) / 3.0;
    const int cc = anc[fine_surface->owner_cell(t)];
    for (int f : m0.cell_faces()[cc])
    {
      if (!m0.is_boundary_face(f))
        continue;
      const double d = std::abs((x - V0[m0.faces()[f][0]]).dot(m0.face_normal(f)));
      if (d < 1e-10 * m0.cell_diameter(cc))
      {
        coarse_triangle[t] = coarse->triangle_of_face(f);
        break;
      }
    }
    if (coarse_triangle[t] < 0)
      throw Error("auxiliary refinement: fine boundary triangle has no coarse parent");
  }
}

SpMat surface_pairing(const FESpace& a, const FESpace& b,
                      const AuxiliaryRefinement* aux)
{
  return pairing_impl(a, b, aux, -1);
}

NeumannEnergy::NeumannEnergy(SpacePtr M, int r)
    : _M(std::move(M)), _r(r)
{
  if (_M->family() != Family::SurfaceDG and _M->family() != Family::SurfaceLagrange)
    throw Error("NeumannEnergy needs a scalar boundary space");
  _aux = std::make_shared<const AuxiliaryRefinement>(_M->surface_ptr(), r);
  _W = FESpace::create(_aux->fine, Family::Lagrange, _M->degree() + 1);
  _area = _M->surface().total_area();
  const SpMat K = derivative_matrix(*_W, Deriv::Grad);
  SpMat Kr = K.bottomRightCorner(K.rows() - 1, K.cols() - 1);
  _solver = std::make_unique<linalg::SpdSolver>(Kr);

  // int_G psi_j
  _trace_integrals = Eigen::VectorXd::Zero(_W->dim());
  const SurfaceMesh& fs = *_aux->fine_surface;
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int t = 0; t < fs.num_triangles(); ++t)
  {
    triangle_rule(fs, t, _W->poly_degree(), x, w);
    const int c = fs.owner_cell(t);
    const Eigen::MatrixXd B = _W->eval(c, x);
    const auto& d = _W->entity_dofs(c);
    for (std::size_t q = 0; q < w.size(); ++q)
      for (int i = 0; i < B.cols(); ++i)
        _trace_integrals[d[i]] += w[q] * B(q, i);
  }
}

Eigen::VectorXd NeumannEnergy::energy_solve(const Eigen::VectorXd& b) const
{
  return _solver->solve(Eigen::VectorXd(b.tail(b.size() - 1)));
}

NormOperator NeumannEnergy::gram() const
{
  const SpMat N = surface_pairing(*_W, *_M, _aux.get());
  const Eigen::MatrixXd H = inverse_form(*_solver, drop_first_row(N));
  const Eigen::VectorXd a = _M->integrals();
  const Eigen::VectorXd one
      = interpolate(*_M, scalar_field([](const Vec3&) { return 1.0; }));
  // P0 = I - one a^T / |G| maps g to its mean-free part
  Eigen::MatrixXd P0 = -one * a.transpose() / _area;
  P0.diagonal().array() += 1.0;
  Eigen::MatrixXd G = P0.transpose() * H * P0 + a * a.transpose() / _area;
  G = 0.5 * (G + G.transpose());

  NormOperator op;
  op.kind = NormKind::hminus_half;
  op.space = _M;
  op.resolution = _r;
  op.sparse = false;
  op.dense_matrix = std::move(G);
  op.metadata = {{"kind", to_string(op.kind)},
                 {"family", to_string(_M->family())},
                 {"k", _M->degree()},
                 {"dim", _M->dim()},
                 {"resolution", _r},
                 {"aux_cells", _aux->fine->num_cells()},
                 {"aux_dim", _W->dim()},
                 {"aux_degree", _W->poly_degree()},
                 {"mean_weight", 1.0 / _area}};
  return op;
}

Eigen::VectorXd NeumannEnergy::load(const Field& g, int deg, double& mean) const
{
  const SurfaceMesh& fs = *_aux->fine_surface;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(_W->dim());
  mean = 0.0;
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int t = 0; t < fs.num_triangles(); ++t)
  {
    triangle_rule(fs, t, deg, x, w);
    const int c = fs.owner_cell(t);
    const int tc = _aux->coarse_triangle[t];
    const Eigen::MatrixXd B = _W->eval(c, x);
    const auto& d = _W->entity_dofs(c);
    for (std::size_t q = 0; q < w.size(); ++q)
    {
      const double gv = g(x[q], tc)[0];
      mean += w[q] * gv;
      for (int i = 0; i < B.cols(); ++i)
        b[d[i]] += w[q] * gv * B(q, i);
    }
  }
  return b;
}

double NeumannEnergy::norm_sq(const Field& g, int deg) const
{
  if (deg < 0)
    deg = 2 * _W->poly_degree() + 2;
  double integral = 0.0;
  Eigen::VectorXd b = load(g, deg, integral);
  b -= (integral / _area) * _trace_integrals;
  const Eigen::VectorXd u = energy_solve(b);
  return b.tail(b.size() - 1).dot(u) + integral * integral / _area;
}

TangentialDual::TangentialDual(SpacePtr R, int r)
    : _R(std::move(R)),
      _M(FESpace::create(_R->surface_ptr(), Family::SurfaceDG, _R->degree())),
      _r(r), _div(_M, r)
{
  if (_R->family() != Family::SurfaceRT)
    throw Error("TangentialDual needs a SurfaceRT space");
  const SpacePtr W = _div.aux_space();
  SpMat A = derivative_matrix(*W, Deriv::Grad) + mass_matrix(*W);
  _solver = std::make_unique<linalg::SpdSolver>(A);
}

NormOperator TangentialDual::gram() const
{
  const SpacePtr W = _div.aux_space();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(_R->dim(), _R->dim());
  for (int c = 0; c < 3; ++c)
    G += inverse_form(*_solver, pairing_impl(*W, *_R, &_div.aux(), c));
  const SpMat D = diff_operator(DiffKind::surf_div, _R, _M).matrix;
  const Eigen::MatrixXd Gd = _div.gram().dense_matrix;
  G += D.transpose() * Gd * D;
  G = 0.5 * (G + G.transpose());

  NormOperator op;
  op.kind = NormKind::hminus_half_par_div;
  op.space = _R;
  op.resolution = _r;
  op.sparse = false;
  op.dense_matrix = std::move(G);
  op.metadata = {{"kind", to_string(op.kind)},
                 {"family", to_string(_R->family())},
                 {"k", _R->degree()},
                 {"dim", _R->dim()},
                 {"resolution", _r},
                 {"aux_cells", _div.aux().fine->num_cells()},
                 {"aux_dim", W->dim()}};
  return op;
}

double TangentialDual::norm_sq(const Field& r, const Field& div_r, int deg) const
{
  const SpacePtr W = _div.aux_space();
  if (deg < 0)
    deg = 2 * W->poly_degree() + 2;
  const AuxiliaryRefinement& aux = _div.aux();
  const SurfaceMesh& fs = *aux.fine_surface;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(W->dim(), 3);
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int t = 0; t < fs.num_triangles(); ++t)
  {
    triangle_rule(fs, t, deg, x, w);
    const int c = fs.owner_cell(t);
    const int tc = aux.coarse_triangle[t];
    const Eigen::MatrixXd B = W->eval(c, x);
    const auto& d = W->entity_dofs(c);
    for (std::size_t q = 0; q < w.size(); ++q)
    {
      const Eigen::VectorXd rv = r(x[q], tc);
      for (int i = 0; i < B.cols(); ++i)
        b.row(d[i]) += w[q] * B(q, i) * rv.transpose();
    }
  }
  const Eigen::MatrixXd u = _solver->solve(b);
  return (b.array() * u.array()).sum() + _div.norm_sq(div_r, deg);
}

NormOperator hminus_half_gram(SpacePtr M, int r)
{
  return NeumannEnergy(std::move(M), r).gram();
}

NormOperator hminus_half_par_div_gram(SpacePtr R, int r)
{
  return TangentialDual(std::move(R), r).gram();
}

double dual_norm(const Eigen::VectorXd& g, const NormOperator& primal,
                 const SpMat& pairing)
{
  if (pairing.rows() != primal.dim() or pairing.cols() != g.size())
    throw Error("dual_norm: pairing has the wrong shape");
  const Eigen::VectorXd v = pairing * g;
  Eigen::VectorXd y;
  if (primal.sparse)
    y = linalg::SpdSolver(primal.sparse_matrix).solve(v);
  else
  {
    Eigen::LLT<Eigen::MatrixXd> llt(primal.dense_matrix);
    if (llt.info() != Eigen::Success)
      throw Error("dual_norm: primal Gram is not positive definite");
    y = llt.solve(v);
  }
  return std::sqrt(std::max(v.dot(y), 0.0));
}

} // namespace tracelift
