#include "tracelift/fe_space.h"
#include "tracelift/quadrature.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <unordered_map>

namespace tracelift
{

std::string to_string(Family f)
{
  switch (f)
  {
  case Family::Lagrange:
    return "Lagrange";
  case Family::DG:
    return "DG";
  case Family::RaviartThomas:
    return "RaviartThomas";
  case Family::Nedelec1:
    return "Nedelec1";
  case Family::SurfaceDG:
    return "SurfaceDG";
  case Family::SurfaceRT:
    return "SurfaceRT";
  case Family::SurfaceLagrange:
    return "SurfaceLagrange";
  }
  return "?";
}

Family family_from_string(const std::string& s)
{
  for (Family f : {Family::Lagrange, Family::DG, Family::RaviartThomas,
                   Family::Nedelec1, Family::SurfaceDG, Family::SurfaceRT,
                   Family::SurfaceLagrange})
    if (to_string(f) == s)
      return f;
  throw Error("unknown family: " + s);
}

namespace
{

// One term c * xi^e of component `comp` of a vector polynomial.
struct Term
{
  double c;
  int comp;
  std::array<int, 3> e;
};
using VecPoly = std::vector<Term>;

std::array<int, 3> unit(int d)
{
  std::array<int, 3> e = {0, 0, 0};
  if (d >= 0)
    e[d] = 1;
  return e;
}

std::array<int, 3> add(std::array<int, 3> a, std::array<int, 3> b)
{
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

// Multiplies every term by the monomial xi^e.
VecPoly times(VecPoly p, std::array<int, 3> e)
{
  for (auto& t : p)
    t.e = add(t.e, e);
  return p;
}

VecPoly const_vec(int c) { return {{1.0, c, {0, 0, 0}}}; }

// e_i x xi
VecPoly cross_xi(int i)
{
  const int j = (i + 1) % 3, k = (i + 2) % 3;
  // (e_i x xi)_j = -xi_k, (e_i x xi)_k = xi_j
  return {{-1.0, j, unit(k)}, {1.0, k, unit(j)}};
}

VecPoly position(int dim)
{
  VecPoly p;
  for (int c = 0; c < dim; ++c)
    p.push_back({1.0, c, unit(c)});
  return p;
}

std::vector<VecPoly> prebasis(Family f, int k)
{
  std::vector<VecPoly> b;
  const int dim = (f == Family::SurfaceRT) ? 2 : 3;
  auto linear = [&] {
    for (int c = 0; c < dim; ++c)
    {
      b.push_back(const_vec(c));
      if (k == 1)
        for (int d = 0; d < dim; ++d)
          b.push_back(times(const_vec(c), unit(d)));
    }
  };
  switch (f)
  {
  case Family::RaviartThomas:
  case Family::SurfaceRT:
    linear();
    if (k == 0)
      b.push_back(position(dim));
    else
      for (int j = 0; j < dim; ++j)
        b.push_back(times(position(dim), unit(j)));
    break;
  case Family::Nedelec1:
    linear();
    if (k == 0)
      for (int i = 0; i < 3; ++i)
        b.push_back(cross_xi(i));
    else
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (!(i == 2 and j == 2))
            b.push_back(times(cross_xi(i), unit(j)));
    break;
  default:
    throw Error("no vector prebasis for " + to_string(f));
  }
  return b;
}

const std::vector<VecPoly>& cached_prebasis(Family f, int k)
{
  static std::mutex m;
  static std::map<std::pair<int, int>, std::vector<VecPoly>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto key = std::make_pair(static_cast<int>(f), k);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, prebasis(f, k)).first;
  return it->second;
}

double ipow(double x, int e)
{
  double r = 1.0;
  for (int i = 0; i < e; ++i)
    r *= x;
  return r;
}

// Compositions of p into n nonnegative parts, lexicographic.
std::vector<std::array<int, 4>> lattice(int n, int p)
{
  std::vector<std::array<int, 4>> out;
  std::array<int, 4> a = {0, 0, 0, 0};
  std::function<void(int, int)> rec = [&](int i, int rest) {
    if (i == n - 1)
    {
      a[i] = rest;
      out.push_back(a);
      return;
    }
    for (int v = rest; v >= 0; --v)
    {
      a[i] = v;
      rec(i + 1, rest - v);
    }
  };
  rec(0, p);
  return out;
}

std::uint64_t pack_key(std::vector<int> ids)
{
  std::sort(ids.begin(), ids.end());
  std::uint64_t key = 0;
  for (int v : ids)
    key = (key << 21) | static_cast<std::uint64_t>(v);
  return key;
}

std::uint64_t node_key(const std::array<int, 4>& alpha, const int* verts,
                       int n)
{
  std::vector<int> ids;
  for (int j = 0; j < n; ++j)
    for (int r = 0; r < alpha[j]; ++r)
      ids.push_back(verts[j]);
  return pack_key(ids);
}

// L_a(lambda) = prod_{m<a} (p lambda - m) / (m + 1) and its derivative.
void lagrange_factor(int a, int p, double lam, double& v, double& dv)
{
  v = 1.0;
  dv = 0.0;
  for (int m = 0; m < a; ++m)
  {
    const double f = (p * lam - m) / (m + 1.0);
    const double df = p / (m + 1.0);
    dv = dv * f + v * df;
    v *= f;
  }
}

} // namespace

const Eigen::MatrixXd& orthonormal_simplex_basis(int dim, int k)
{
  static std::mutex m;
  static std::map<std::pair<int, int>, Eigen::MatrixXd> cache;
  std::lock_guard<std::mutex> lock(m);
  auto key = std::make_pair(dim, k);
  auto it = cache.find(key);
  if (it != cache.end())
    return it->second;
  if (k < 0 or k > 1 or dim < 1 or dim > 3)
    throw Error("orthonormal basis only for k <= 1");
  const int n = k == 0 ? 1 : dim + 1;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  auto accumulate = [&](const auto& rule) {
    for (std::size_t q = 0; q < rule.size(); ++q)
    {
      Eigen::VectorXd mono(n);
      mono[0] = 1.0;
      for (int j = 1; j < n; ++j)
        mono[j] = rule.points[q][j];
      G += rule.weights[q] * mono * mono.transpose();
    }
  };
  if (dim == 1)
    accumulate(quadrature::line(2));
  else if (dim == 2)
    accumulate(quadrature::triangle(2));
  else
    accumulate(quadrature::tetrahedron(2));
  Eigen::MatrixXd L = G.llt().matrixL();
  Eigen::MatrixXd B = L.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(n, n));
  return cache.emplace(key, B).first->second;
}

std::shared_ptr<const FESpace> FESpace::create(std::shared_ptr<const Mesh> mesh,
                                               Family family, int k,
                                               bool mean_zero)
{
  switch (family)
  {
  case Family::Lagrange:
  case Family::DG:
  case Family::RaviartThomas:
  case Family::Nedelec1:
    break;
  default:
    throw Error("family " + to_string(family) + " needs a surface mesh");
  }
  const int kmax = family == Family::Lagrange ? 2 : 1;
  if (k < 0 or k > kmax)
    throw Error("unsupported (family, k) combination: (" + to_string(family)
                + ", " + std::to_string(k) + ")");
  std::shared_ptr<FESpace> s(new FESpace());
  s->_mesh = std::move(mesh);
  s->_family = family;
  s->_k = k;
  s->_mean_zero = mean_zero;
  s->build();
  return s;
}

std::shared_ptr<const FESpace>
FESpace::create(std::shared_ptr<const SurfaceMesh> surface, Family family,
                int k, bool mean_zero)
{
  switch (family)
  {
  case Family::SurfaceDG:
  case Family::SurfaceRT:
  case Family::SurfaceLagrange:
    break;
  default:
    throw Error("family " + to_string(family) + " needs a volume mesh");
  }
  const int kmax = family == Family::SurfaceLagrange ? 2 : 1;
  if (k < 0 or k > kmax)
    throw Error("unsupported (family, k) combination: (" + to_string(family)
                + ", " + std::to_string(k) + ")");
  std::shared_ptr<FESpace> s(new FESpace());
  s->_mesh = surface->mesh_ptr();
  s->_surface = std::move(surface);
  s->_family = family;
  s->_k = k;
  s->_mean_zero = mean_zero;
  s->build();
  return s;
}

const SurfaceMesh& FESpace::surface() const
{
  if (!_surface)
    throw Error("space is not a surface space");
  return *_surface;
}

int FESpace::poly_degree() const
{
  switch (_family)
  {
  case Family::Lagrange:
  case Family::SurfaceLagrange:
    return _k + 1;
  case Family::DG:
  case Family::SurfaceDG:
    return _k;
  default:
    return _k + 1;
  }
}

bool FESpace::is_vector() const
{
  return _family == Family::RaviartThomas or _family == Family::Nedelec1
         or _family == Family::SurfaceRT;
}

double FESpace::domain_measure() const
{
  return is_surface() ? _surface->total_area() : _mesh->volume();
}

Vec3 FESpace::point(int e, const Eigen::VectorXd& bary) const
{
  if (is_surface())
    return _surface->point(e, bary.head<3>());
  return _mesh->point(e, bary.head<4>());
}

double FESpace::entity_measure(int e) const
{
  return is_surface() ? _surface->area(e) : _mesh->cell_volume(e);
}

double FESpace::entity_diameter(int e) const
{
  return is_surface() ? _surface->diameter(e) : _mesh->cell_diameter(e);
}

void FESpace::build()
{
  const int ne = is_surface() ? _surface->num_triangles() : _mesh->num_cells();
  const auto& x = _mesh->vertices();
  _x0.resize(ne);
  _bary_map.resize(ne);
  _centroid.resize(ne);
  _h.resize(ne);
  for (int e = 0; e < ne; ++e)
  {
    if (is_surface())
    {
      const auto& tv = _surface->triangle(e);
      Eigen::Matrix<double, 3, 2> J;
      J.col(0) = x[tv[1]] - x[tv[0]];
      J.col(1) = x[tv[2]] - x[tv[0]];
      Eigen::Matrix<double, 2, 3> P
          = (J.transpose() * J).inverse() * J.transpose();
      _bary_map[e].setZero();
      _bary_map[e].topRows<2>() = P;
      _x0[e] = x[tv[0]];
      _centroid[e] = (x[tv[0]] + x[tv[1]] + x[tv[2]]) / 3.0;
      _h[e] = _surface->diameter(e);
    }
    else
    {
      const auto& cv = _mesh->cells()[e];
      Eigen::Matrix3d J;
      for (int j = 0; j < 3; ++j)
        J.col(j) = x[cv[j + 1]] - x[cv[0]];
      _bary_map[e] = J.inverse();
      _x0[e] = x[cv[0]];
      _centroid[e] = _mesh->cell_centroid(e);
      _h[e] = _mesh->cell_diameter(e);
    }
  }

  switch (_family)
  {
  case Family::Lagrange:
  case Family::SurfaceLagrange:
    build_lagrange();
    break;
  case Family::DG:
  case Family::SurfaceDG:
    build_dg();
    break;
  default:
    build_vector();
  }
  if (!is_vector())
    compute_integrals();
}

void FESpace::build_lagrange()
{
  const int p = _k + 1;
  const int nv = is_surface() ? 3 : 4;
  _lattice = lattice(nv, p);
  _nloc = static_cast<int>(_lattice.size());
  const int ne = static_cast<int>(_h.size());
  std::unordered_map<std::uint64_t, int> map;
  _dofs.assign(ne, std::vector<int>(_nloc));
  _keys.assign(ne, std::vector<std::uint64_t>(_nloc));
  for (int e = 0; e < ne; ++e)
  {
    const int* verts = is_surface() ? _surface->triangle(e).data()
                                    : _mesh->cells()[e].data();
    for (int i = 0; i < _nloc; ++i)
    {
      const std::uint64_t key = node_key(_lattice[i], verts, nv);
      auto [it, ins] = map.try_emplace(key, static_cast<int>(map.size()));
      _dofs[e][i] = it->second;
      _keys[e][i] = key;
    }
  }
  _ndofs = static_cast<int>(map.size());
  _boundary.assign(_ndofs, 0);
  if (!is_surface())
  {
    const auto flat = lattice(3, p);
    for (int f : _mesh->boundary_faces())
      for (const auto& a : flat)
        _boundary[map.at(node_key(a, _mesh->faces()[f].data(), 3))] = 1;
  }
  _key_lookup.assign(map.begin(), map.end());
  std::sort(_key_lookup.begin(), _key_lookup.end());
}

void FESpace::build_dg()
{
  _nloc = _k == 0 ? 1 : (is_surface() ? 3 : 4);
  const int ne = static_cast<int>(_h.size());
  _dofs.assign(ne, std::vector<int>(_nloc));
  for (int e = 0; e < ne; ++e)
    for (int i = 0; i < _nloc; ++i)
      _dofs[e][i] = e * _nloc + i;
  _ndofs = ne * _nloc;
  _boundary.assign(_ndofs, 0);
}

void FESpace::build_vector()
{
  const auto& pb = cached_prebasis(_family, _k);
  _nloc = static_cast<int>(pb.size());
  const int ne = static_cast<int>(_h.size());
  _dofs.assign(ne, std::vector<int>());
  const Mesh& m = *_mesh;
  if (_family == Family::RaviartThomas)
  {
    const int nf = _k == 0 ? 1 : 3;
    const int offset = m.num_faces() * nf;
    for (int c = 0; c < ne; ++c)
    {
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < nf; ++j)
          _dofs[c].push_back(m.cell_faces()[c][i] * nf + j);
      if (_k == 1)
        for (int j = 0; j < 3; ++j)
          _dofs[c].push_back(offset + 3 * c + j);
    }
    _ndofs = offset + (_k == 1 ? 3 * ne : 0);
    _boundary.assign(_ndofs, 0);
    for (int f : m.boundary_faces())
      for (int j = 0; j < nf; ++j)
        _boundary[f * nf + j] = 1;
  }
  else if (_family == Family::Nedelec1)
  {
    const int nedge = _k + 1;
    const int offset = m.num_edges() * nedge;
    for (int c = 0; c < ne; ++c)
    {
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < nedge; ++j)
          _dofs[c].push_back(m.cell_edges()[c][i] * nedge + j);
      if (_k == 1)
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 2; ++j)
            _dofs[c].push_back(offset + 2 * m.cell_faces()[c][i] + j);
    }
    _ndofs = offset + (_k == 1 ? 2 * m.num_faces() : 0);
    _boundary.assign(_ndofs, 0);
    for (int f : m.boundary_faces())
    {
      const auto& fv = m.faces()[f];
      for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}})
      {
        const int e = m.find_edge(fv[a], fv[b]);
        for (int j = 0; j < nedge; ++j)
          _boundary[e * nedge + j] = 1;
      }
      if (_k == 1)
        for (int j = 0; j < 2; ++j)
          _boundary[offset + 2 * f + j] = 1;
    }
  }
  else
  {
    const SurfaceMesh& s = *_surface;
    const int nedge = _k + 1;
    const int offset = s.num_edges() * nedge;
    for (int t = 0; t < ne; ++t)
    {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < nedge; ++j)
          _dofs[t].push_back(s.triangle_edges(t)[i] * nedge + j);
      if (_k == 1)
        for (int j = 0; j < 2; ++j)
          _dofs[t].push_back(offset + 2 * t + j);
    }
    _ndofs = offset + (_k == 1 ? 2 * ne : 0);
    _boundary.assign(_ndofs, 0);
  }

  _coeffs.resize(ne);
  for (int e = 0; e < ne; ++e)
  {
    LocalDofs ld = local_dofs(e);
    Eigen::MatrixXd P = eval_prebasis(e, ld.points, Deriv::Value);
    Eigen::MatrixXd V = ld.weights * P;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
    if (!lu.isInvertible())
      throw Error("singular local DOF matrix on entity " + std::to_string(e));
    _coeffs[e] = lu.inverse();
  }
}

void FESpace::compute_integrals()
{
  _integrals = Eigen::VectorXd::Zero(_ndofs);
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int e = 0; e < num_entities(); ++e)
  {
    entity_quadrature(*this, e, poly_degree(), x, w);
    Eigen::MatrixXd B = eval(e, x, Deriv::Value);
    for (std::size_t q = 0; q < x.size(); ++q)
      for (int i = 0; i < _nloc; ++i)
        _integrals[_dofs[e][i]] += w[q] * B(q, i);
  }
}

std::uint64_t FESpace::lagrange_key(int e, int i) const
{
  if (_keys.empty())
    return static_cast<std::uint64_t>(-1);
  return _keys[e][i];
}

int FESpace::lagrange_dof(std::uint64_t key) const
{
  auto it = std::lower_bound(_key_lookup.begin(), _key_lookup.end(),
                             std::pair<std::uint64_t, int>(key, -1));
  if (it == _key_lookup.end() or it->first != key)
    return -1;
  return it->second;
}

Eigen::VectorXd FESpace::barycentric(int e, const Vec3& x) const
{
  const Vec3 d = x - _x0[e];
  if (is_surface())
  {
    Eigen::VectorXd l(3);
    l[1] = _bary_map[e].row(0).dot(d);
    l[2] = _bary_map[e].row(1).dot(d);
    l[0] = 1.0 - l[1] - l[2];
    return l;
  }
  Eigen::VectorXd l(4);
  const Vec3 r = _bary_map[e] * d;
  l.tail<3>() = r;
  l[0] = 1.0 - r.sum();
  return l;
}

int FESpace::deriv_size(Deriv d) const
{
  switch (d)
  {
  case Deriv::Value:
    return value_size();
  case Deriv::Div:
  case Deriv::SurfDiv:
    return 1;
  default:
    return 3;
  }
}

Eigen::MatrixXd FESpace::eval(int e, const std::vector<Vec3>& x,
                              Deriv d) const
{
  if (e < 0 or e >= num_entities())
    throw Error("entity id out of range: " + std::to_string(e));
  switch (_family)
  {
  case Family::Lagrange:
  case Family::SurfaceLagrange:
    return eval_lagrange(e, x, d);
  case Family::DG:
  case Family::SurfaceDG:
    return eval_dg(e, x, d);
  default:
    return eval_prebasis(e, x, d) * _coeffs[e];
  }
}

Eigen::MatrixXd FESpace::eval_lagrange(int e, const std::vector<Vec3>& x,
                                       Deriv d) const
{
  const bool surf = is_surface();
  if (d != Deriv::Value
      and !(d == Deriv::Grad and !surf)
      and !(surf and (d == Deriv::SurfGrad or d == Deriv::SurfCurl)))
    throw Error("derivative not available for " + to_string(_family));
  const int p = _k + 1;
  const int nv = surf ? 3 : 4;
  const int rs = d == Deriv::Value ? 1 : 3;
  Eigen::MatrixXd out(x.size() * rs, _nloc);
  std::array<Vec3, 4> gl;
  for (int j = 1; j < nv; ++j)
    gl[j] = _bary_map[e].row(j - 1).transpose();
  gl[0] = -(gl[1] + gl[2] + (surf ? Vec3::Zero() : gl[3]));
  const Vec3 n = surf ? _surface->normal(e) : Vec3::Zero();
  for (std::size_t q = 0; q < x.size(); ++q)
  {
    Eigen::VectorXd l = barycentric(e, x[q]);
    for (int i = 0; i < _nloc; ++i)
    {
      const auto& a = _lattice[i];
      std::array<double, 4> v, dv;
      for (int j = 0; j < nv; ++j)
        lagrange_factor(a[j], p, l[j], v[j], dv[j]);
      if (d == Deriv::Value)
      {
        double val = 1.0;
        for (int j = 0; j < nv; ++j)
          val *= v[j];
        out(q, i) = val;
        continue;
      }
      Vec3 g = Vec3::Zero();
      for (int j = 0; j < nv; ++j)
      {
        double prod = dv[j];
        for (int m = 0; m < nv; ++m)
          if (m != j)
            prod *= v[m];
        g += prod * gl[j];
      }
      if (d == Deriv::SurfCurl)
        g = g.cross(n);
      out.block(3 * q, i, 3, 1) = g;
    }
  }
  return out;
}

Eigen::MatrixXd FESpace::eval_dg(int e, const std::vector<Vec3>& x,
                                 Deriv d) const
{
  const bool surf = is_surface();
  if (d != Deriv::Value and !(d == Deriv::Grad and !surf))
    throw Error("derivative not available for " + to_string(_family));
  const int dim = surf ? 2 : 3;
  const double scale = 1.0 / std::sqrt(entity_measure(e));
  const Eigen::MatrixXd& B = orthonormal_simplex_basis(dim, _k);
  if (d == Deriv::Grad)
  {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3 * x.size(), _nloc);
    if (_k == 0)
      return out;
    for (std::size_t q = 0; q < x.size(); ++q)
      for (int i = 0; i < _nloc; ++i)
      {
        Vec3 g = Vec3::Zero();
        for (int j = 1; j <= dim; ++j)
          g += B(i, j) * _bary_map[e].row(j - 1).transpose();
        out.block(3 * q, i, 3, 1) = scale * g;
      }
    return out;
  }
  Eigen::MatrixXd out(x.size(), _nloc);
  for (std::size_t q = 0; q < x.size(); ++q)
  {
    Eigen::VectorXd l = barycentric(e, x[q]);
    Eigen::VectorXd mono(_nloc);
    mono[0] = 1.0;
    for (int j = 1; j < _nloc; ++j)
      mono[j] = l[j];
    out.row(q) = scale * (B * mono).transpose();
  }
  return out;
}

Eigen::MatrixXd FESpace::eval_prebasis(int e, const std::vector<Vec3>& x,
                                       Deriv d) const
{
  const auto& pb = cached_prebasis(_family, _k);
  const int np = static_cast<int>(pb.size());
  const bool surf = is_surface();
  const double h = _h[e];
  bool ok = d == Deriv::Value;
  ok = ok or (_family == Family::RaviartThomas and d == Deriv::Div);
  ok = ok or (_family == Family::Nedelec1 and d == Deriv::Curl);
  ok = ok or (_family == Family::SurfaceRT and d == Deriv::SurfDiv);
  if (!ok)
    throw Error("derivative not available for " + to_string(_family));
  const int rs = deriv_size(d);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.size() * rs, np);
  Vec3 t1 = Vec3::Zero(), t2 = Vec3::Zero();
  if (surf)
  {
    t1 = _surface->t1(e);
    t2 = _surface->t2(e);
  }
  for (std::size_t q = 0; q < x.size(); ++q)
  {
    const Vec3 r = (x[q] - _centroid[e]) / h;
    std::array<double, 3> xi;
    if (surf)
      xi = {r.dot(t1), r.dot(t2), 0.0};
    else
      xi = {r[0], r[1], r[2]};
    for (int j = 0; j < np; ++j)
    {
      double val[3] = {0, 0, 0};
      double jac[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
      for (const Term& t : pb[j])
      {
        const double m0 = ipow(xi[0], t.e[0]), m1 = ipow(xi[1], t.e[1]),
                     m2 = ipow(xi[2], t.e[2]);
        if (d == Deriv::Value)
        {
          val[t.comp] += t.c * m0 * m1 * m2;
          continue;
        }
        if (t.e[0] > 0)
          jac[t.comp][0] += t.c * t.e[0] * ipow(xi[0], t.e[0] - 1) * m1 * m2;
        if (t.e[1] > 0)
          jac[t.comp][1] += t.c * t.e[1] * m0 * ipow(xi[1], t.e[1] - 1) * m2;
        if (t.e[2] > 0)
          jac[t.comp][2] += t.c * t.e[2] * m0 * m1 * ipow(xi[2], t.e[2] - 1);
      }
      switch (d)
      {
      case Deriv::Value:
        if (surf)
          out.block(3 * q, j, 3, 1) = val[0] * t1 + val[1] * t2;
        else
          for (int c = 0; c < 3; ++c)
            out(3 * q + c, j) = val[c];
        break;
      case Deriv::Div:
        out(q, j) = (jac[0][0] + jac[1][1] + jac[2][2]) / h;
        break;
      case Deriv::SurfDiv:
        out(q, j) = (jac[0][0] + jac[1][1]) / h;
        break;
      case Deriv::Curl:
        out(3 * q + 0, j) = (jac[2][1] - jac[1][2]) / h;
        out(3 * q + 1, j) = (jac[0][2] - jac[2][0]) / h;
        out(3 * q + 2, j) = (jac[1][0] - jac[0][1]) / h;
        break;
      default:
        break;
      }
    }
  }
  return out;
}

LocalDofs FESpace::local_dofs(int e) const
{
  LocalDofs ld;
  const Mesh& m = *_mesh;
  const auto& X = m.vertices();
  const int qdeg = dof_quadrature_degree();

  if (_family == Family::Lagrange or _family == Family::SurfaceLagrange)
  {
    const int p = _k + 1;
    const int nv = is_surface() ? 3 : 4;
    for (const auto& a : _lattice)
    {
      Eigen::VectorXd b(nv);
      for (int j = 0; j < nv; ++j)
        b[j] = double(a[j]) / p;
      ld.points.push_back(point(e, b));
    }
    ld.weights = Eigen::MatrixXd::Identity(_nloc, _nloc);
    return ld;
  }
  if (_family == Family::DG or _family == Family::SurfaceDG)
  {
    std::vector<double> w;
    entity_quadrature(*this, e, qdeg, ld.points, w);
    Eigen::MatrixXd B = eval_dg(e, ld.points, Deriv::Value);
    ld.weights = B.transpose();
    for (std::size_t q = 0; q < w.size(); ++q)
      ld.weights.col(q) *= w[q];
    return ld;
  }

  // Vector families: collect (point, row, vector) contributions.
  struct Contribution
  {
    int row;
    Vec3 x;
    Vec3 v; // weight vector dotted with the field value
  };
  std::vector<Contribution> contrib;
  const auto& tri = quadrature::triangle(qdeg);
  const auto& tet = quadrature::tetrahedron(qdeg);
  const auto& seg = quadrature::line(qdeg);
  const Eigen::MatrixXd& ortho2 = orthonormal_simplex_basis(2, _k);

  auto face_moments = [&](int row0, const std::array<int, 3>& fv, Vec3 n,
                          double area) {
    for (std::size_t q = 0; q < tri.size(); ++q)
    {
      const auto& l = tri.points[q];
      const Vec3 xq = l[0] * X[fv[0]] + l[1] * X[fv[1]] + l[2] * X[fv[2]];
      Eigen::VectorXd mono(ortho2.cols());
      mono[0] = 1.0;
      for (int j = 1; j < mono.size(); ++j)
        mono[j] = l[j];
      const Eigen::VectorXd w = ortho2 * mono / std::sqrt(area);
      for (int j = 0; j < w.size(); ++j)
        contrib.push_back({row0 + j, xq, tri.weights[q] * area * w[j] * n});
    }
  };
  auto edge_moments = [&](int row0, int a, int b, const Vec3& dir) {
    const double L = (X[b] - X[a]).norm();
    for (std::size_t q = 0; q < seg.size(); ++q)
    {
      const double s = seg.points[q][1];
      const Vec3 xq = (1.0 - s) * X[a] + s * X[b];
      const double q0 = 1.0 / std::sqrt(L);
      contrib.push_back({row0, xq, seg.weights[q] * L * q0 * dir});
      if (_k == 1)
      {
        const double q1 = std::sqrt(3.0 / L) * (2.0 * s - 1.0);
        contrib.push_back({row0 + 1, xq, seg.weights[q] * L * q1 * dir});
      }
    }
  };
  auto tangential_face_moments = [&](int row0, const std::array<int, 3>& fv,
                                     const Vec3& t1, const Vec3& t2,
                                     double area) {
    for (std::size_t q = 0; q < tri.size(); ++q)
    {
      const auto& l = tri.points[q];
      const Vec3 xq = l[0] * X[fv[0]] + l[1] * X[fv[1]] + l[2] * X[fv[2]];
      const double w = tri.weights[q] * std::sqrt(area);
      contrib.push_back({row0, xq, w * t1});
      contrib.push_back({row0 + 1, xq, w * t2});
    }
  };

  if (_family == Family::RaviartThomas)
  {
    const int nf = _k == 0 ? 1 : 3;
    for (int i = 0; i < 4; ++i)
    {
      const int f = m.cell_faces()[e][i];
      face_moments(i * nf, m.faces()[f], m.face_normal(f), m.face_area(f));
    }
    if (_k == 1)
    {
      const double vol = m.cell_volume(e);
      for (std::size_t q = 0; q < tet.size(); ++q)
      {
        const Vec3 xq = m.point(e, tet.points[q]);
        const double w = tet.weights[q] * std::sqrt(vol);
        for (int c = 0; c < 3; ++c)
          contrib.push_back({4 * nf + c, xq, w * Vec3::Unit(c)});
      }
    }
  }
  else if (_family == Family::Nedelec1)
  {
    const int ne = _k + 1;
    for (int i = 0; i < 6; ++i)
    {
      const auto& ev = m.edges()[m.cell_edges()[e][i]];
      const Vec3 t = (X[ev[1]] - X[ev[0]]).normalized();
      edge_moments(i * ne, ev[0], ev[1], t);
    }
    if (_k == 1)
      for (int i = 0; i < 4; ++i)
      {
        const int f = m.cell_faces()[e][i];
        const auto& fv = m.faces()[f];
        const Vec3 t1 = (X[fv[1]] - X[fv[0]]).normalized();
        const Vec3 t2 = m.face_normal(f).cross(t1);
        tangential_face_moments(12 + 2 * i, fv, t1, t2, m.face_area(f));
      }
  }
  else
  {
    const SurfaceMesh& s = *_surface;
    const Vec3& n = s.normal(e);
    const int ne = _k + 1;
    for (int i = 0; i < 3; ++i)
    {
      const auto& ev = s.edges()[s.triangle_edges(e)[i]];
      const Vec3 t = (X[ev[1]] - X[ev[0]]).normalized();
      edge_moments(i * ne, ev[0], ev[1], t.cross(n));
    }
    if (_k == 1)
      tangential_face_moments(6, s.triangle(e), s.t1(e).cross(n),
                              s.t2(e).cross(n), s.area(e));
  }

  ld.points.reserve(contrib.size());
  ld.weights = Eigen::MatrixXd::Zero(_nloc, 3 * contrib.size());
  for (std::size_t p = 0; p < contrib.size(); ++p)
  {
    ld.points.push_back(contrib[p].x);
    for (int c = 0; c < 3; ++c)
      ld.weights(contrib[p].row, 3 * p + c) = contrib[p].v[c];
  }
  return ld;
}

void entity_quadrature(const FESpace& space, int e, int degree,
                       std::vector<Vec3>& x, std::vector<double>& w)
{
  x.clear();
  w.clear();
  const double meas = space.entity_measure(e);
  if (space.is_surface())
  {
    const auto& r = quadrature::triangle(degree);
    for (std::size_t q = 0; q < r.size(); ++q)
    {
      x.push_back(space.surface().point(e, r.points[q]));
      w.push_back(r.weights[q] * meas);
    }
  }
  else
  {
    const auto& r = quadrature::tetrahedron(degree);
    for (std::size_t q = 0; q < r.size(); ++q)
    {
      x.push_back(space.mesh().point(e, r.points[q]));
      w.push_back(r.weights[q] * meas);
    }
  }
}

FEFunction::FEFunction(SpacePtr space, Eigen::VectorXd coeffs)
    : _space(std::move(space)), _coeffs(std::move(coeffs))
{
  if (_coeffs.size() != _space->dim())
    throw Error("coefficient length " + std::to_string(_coeffs.size())
                + " does not match space dimension "
                + std::to_string(_space->dim()));
  if (_space->mean_zero())
  {
    const Eigen::VectorXd& a = _space->integrals();
    const double mean = a.dot(_coeffs);
    const double scale = a.cwiseAbs().dot(_coeffs.cwiseAbs());
    if (std::abs(mean) > 1e-10 * scale)
      throw Error("function in mean-zero space has nonzero mean");
  }
}

FEFunction::FEFunction(SpacePtr space)
    : FEFunction(space, Eigen::VectorXd::Zero(space->dim()))
{
}

Field scalar_field(std::function<double(const Vec3&)> f)
{
  return [f](const Vec3& x, int) {
    Eigen::VectorXd v(1);
    v[0] = f(x);
    return v;
  };
}

Field vector_field(std::function<Vec3(const Vec3&)> f)
{
  return [f](const Vec3& x, int) -> Eigen::VectorXd { return f(x); };
}

Eigen::VectorXd interpolate(const FESpace& space, const Field& f)
{
  Eigen::VectorXd c = Eigen::VectorXd::Zero(space.dim());
  const int vs = space.value_size();
  for (int e = 0; e < space.num_entities(); ++e)
  {
    LocalDofs ld = space.local_dofs(e);
    Eigen::VectorXd vals(vs * ld.points.size());
    for (std::size_t q = 0; q < ld.points.size(); ++q)
    {
      Eigen::VectorXd v = f(ld.points[q], e);
      if (v.size() != vs)
        throw Error("field has wrong number of components");
      vals.segment(vs * q, vs) = v;
    }
    Eigen::VectorXd l = ld.weights * vals;
    const auto& dofs = space.entity_dofs(e);
    for (int i = 0; i < space.num_local_dofs(); ++i)
      c[dofs[i]] = l[i];
  }
  return c;
}

FEFunction rt_interpolate(SpacePtr space, const Field& v)
{
  if (space->family() != Family::RaviartThomas)
    throw Error("rt_interpolate needs a RaviartThomas space");
  return FEFunction(space, interpolate(*space, v));
}

FEFunction l2_project_dg(SpacePtr space, const Field& f)
{
  if (space->family() != Family::DG and space->family() != Family::SurfaceDG)
    throw Error("l2_project_dg needs a DG space");
  Eigen::VectorXd c = interpolate(*space, f);
  if (space->mean_zero())
  {
    const Eigen::VectorXd& a = space->integrals();
    c -= (a.dot(c) / space->domain_measure())
         * interpolate(*space, scalar_field([](const Vec3&) { return 1.0; }));
  }
  return FEFunction(space, c);
}

Eigen::VectorXd evaluate(const FEFunction& u, int e, const Eigen::VectorXd& ref)
{
  const FESpace& s = u.space();
  if (e < 0 or e >= s.num_entities())
    throw Error("entity id out of range: " + std::to_string(e));
  const int nb = s.is_surface() ? 3 : 4;
  if (ref.size() != nb)
    throw Error("reference point needs " + std::to_string(nb)
                + " barycentric coordinates");
  const Vec3 x = s.point(e, ref);
  Eigen::MatrixXd B = s.eval(e, {x}, Deriv::Value);
  Eigen::VectorXd c(s.num_local_dofs());
  const auto& dofs = s.entity_dofs(e);
  for (int i = 0; i < s.num_local_dofs(); ++i)
    c[i] = u.coeffs()[dofs[i]];
  return B * c;
}

} // namespace tracelift
