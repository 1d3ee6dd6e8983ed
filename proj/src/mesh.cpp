#include "tracelift/mesh.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace tracelift
{

namespace
{

double signed_volume(const std::vector<Vec3>& x, const std::array<int, 4>& c)
{
  Eigen::Matrix3d J;
  J.col(0) = x[c[1]] - x[c[0]];
  J.col(1) = x[c[2]] - x[c[0]];
  J.col(2) = x[c[3]] - x[c[0]];
  return J.determinant() / 6.0;
}

int lookup(const std::vector<std::pair<std::uint64_t, int>>& table,
           std::uint64_t key)
{
  auto it = std::lower_bound(
      table.begin(), table.end(), std::pair<std::uint64_t, int>(key, -1));
  if (it == table.end() or it->first != key)
    return -1;
  return it->second;
}

} // namespace

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> cells,
           std::vector<int> tags, std::vector<int> parents,
           std::vector<std::array<int, 4>> bisection)
    : _vertices(std::move(vertices)), _cells(std::move(cells)),
      _bisect(std::move(bisection)), _tags(std::move(tags)),
      _parents(std::move(parents))
{
  const int nc = static_cast<int>(_cells.size());
  const int nv = static_cast<int>(_vertices.size());
  if (nc == 0)
    throw MeshError(MeshError::Kind::Degenerate, "mesh has no cells");
  if (_tags.empty())
    _tags.assign(nc, 3);
  if (_parents.empty())
  {
    _parents.resize(nc);
    for (int c = 0; c < nc; ++c)
      _parents[c] = c;
  }
  if (_bisect.empty())
    _bisect = _cells;
  if (static_cast<int>(_tags.size()) != nc
      or static_cast<int>(_parents.size()) != nc
      or static_cast<int>(_bisect.size()) != nc)
    throw MeshError(MeshError::Kind::Parse, "bisection data size mismatch");

  _cell_volumes.resize(nc);
  _cell_diameters.resize(nc);
  for (int c = 0; c < nc; ++c)
  {
    auto& cell = _cells[c];
    for (int v : cell)
      if (v < 0 or v >= nv)
        throw MeshError(MeshError::Kind::Parse,
                        "cell " + std::to_string(c) + " references vertex "
                            + std::to_string(v) + " out of range");
    double vol = signed_volume(_vertices, cell);
    const double h = [&] {
      double m = 0.0;
      for (auto [a, b] : kCellEdges)
        m = std::max(m, (_vertices[cell[a]] - _vertices[cell[b]]).norm());
      return m;
    }();
    if (std::abs(vol) <= 1e-14 * h * h * h)
      throw MeshError(MeshError::Kind::Degenerate,
                      "cell " + std::to_string(c) + " has zero volume");
    if (vol < 0)
    {
      std::swap(cell[2], cell[3]);
      vol = -vol;
    }
    _cell_volumes[c] = vol;
    _cell_diameters[c] = h;
  }

  // Faces and edges, numbered by first encounter
  std::unordered_map<std::uint64_t, int> fmap, emap;
  fmap.reserve(3 * nc);
  emap.reserve(2 * nc);
  _cell_faces.resize(nc);
  _cell_edges.resize(nc);
  for (int c = 0; c < nc; ++c)
  {
    const auto& cell = _cells[c];
    for (int i = 0; i < 4; ++i)
    {
      std::array<int, 3> f;
      for (int j = 0, m = 0; j < 4; ++j)
        if (j != i)
          f[m++] = cell[j];
      std::sort(f.begin(), f.end());
      auto [it, inserted] = fmap.try_emplace(face_key(f), num_faces());
      if (inserted)
      {
        _faces.push_back(f);
        _face_cells.push_back({c, -1});
      }
      else
      {
        auto& fc = _face_cells[it->second];
        if (fc[1] >= 0)
          throw MeshError(MeshError::Kind::NonConforming,
                          "face shared by more than two cells");
        fc[1] = c;
      }
      _cell_faces[c][i] = it->second;
    }
    for (int i = 0; i < 6; ++i)
    {
      int a = cell[kCellEdges[i][0]], b = cell[kCellEdges[i][1]];
      auto [it, inserted] = emap.try_emplace(edge_key(a, b), num_edges());
      if (inserted)
        _edges.push_back({std::min(a, b), std::max(a, b)});
      _cell_edges[c][i] = it->second;
    }
  }

  // Face geometry
  const int nf = num_faces();
  _face_normals.resize(nf);
  _face_areas.resize(nf);
  for (int f = 0; f < nf; ++f)
  {
    const auto& fv = _faces[f];
    Vec3 n = (_vertices[fv[1]] - _vertices[fv[0]])
                 .cross(_vertices[fv[2]] - _vertices[fv[0]]);
    _face_areas[f] = 0.5 * n.norm();
    n.normalize();
    if (_face_cells[f][1] < 0)
    {
      _boundary_faces.push_back(f);
      const int c = _face_cells[f][0];
      int opp = -1;
      for (int v : _cells[c])
        if (v != fv[0] and v != fv[1] and v != fv[2])
          opp = v;
      if (n.dot(_vertices[opp] - _vertices[fv[0]]) > 0)
        n = -n;
    }
    _face_normals[f] = n;
  }

  // Closed boundary: each boundary edge lies on exactly two boundary faces
  std::unordered_map<std::uint64_t, int> bedge_count;
  for (int f : _boundary_faces)
  {
    const auto& fv = _faces[f];
    ++bedge_count[edge_key(fv[0], fv[1])];
    ++bedge_count[edge_key(fv[0], fv[2])];
    ++bedge_count[edge_key(fv[1], fv[2])];
  }
  for (auto& [k, cnt] : bedge_count)
    if (cnt != 2)
      throw MeshError(MeshError::Kind::NonConforming,
                      "non-conforming connectivity: boundary edge on "
                          + std::to_string(cnt) + " boundary faces");

  _vertex_cells.resize(nv);
  for (int c = 0; c < nc; ++c)
    for (int v : _cells[c])
      _vertex_cells[v].push_back(c);

  _edge_lookup.assign(emap.begin(), emap.end());
  std::sort(_edge_lookup.begin(), _edge_lookup.end());
  _face_lookup.assign(fmap.begin(), fmap.end());
  std::sort(_face_lookup.begin(), _face_lookup.end());
}

double Mesh::face_diameter(int f) const
{
  const auto& v = _faces[f];
  return std::max({(_vertices[v[0]] - _vertices[v[1]]).norm(),
                   (_vertices[v[0]] - _vertices[v[2]]).norm(),
                   (_vertices[v[1]] - _vertices[v[2]]).norm()});
}

double Mesh::edge_length(int e) const
{
  return (_vertices[_edges[e][1]] - _vertices[_edges[e][0]]).norm();
}

double Mesh::cell_inradius(int c) const
{
  double s = 0.0;
  for (int f : _cell_faces[c])
    s += _face_areas[f];
  return 3.0 * _cell_volumes[c] / s;
}

Vec3 Mesh::cell_centroid(int c) const
{
  Vec3 x = Vec3::Zero();
  for (int v : _cells[c])
    x += _vertices[v];
  return 0.25 * x;
}

Vec3 Mesh::point(int c, const Bary& lambda) const
{
  const auto& cell = _cells[c];
  return lambda[0] * _vertices[cell[0]] + lambda[1] * _vertices[cell[1]]
         + lambda[2] * _vertices[cell[2]] + lambda[3] * _vertices[cell[3]];
}

double Mesh::volume() const
{
  double v = 0.0;
  for (double x : _cell_volumes)
    v += x;
  return v;
}

double Mesh::h_min() const
{
  return *std::min_element(_cell_diameters.begin(), _cell_diameters.end());
}

double Mesh::h_max() const
{
  return *std::max_element(_cell_diameters.begin(), _cell_diameters.end());
}

int Mesh::find_edge(int a, int b) const
{
  return lookup(_edge_lookup, edge_key(a, b));
}

int Mesh::find_face(int a, int b, int c) const
{
  std::array<int, 3> f = {a, b, c};
  std::sort(f.begin(), f.end());
  return lookup(_face_lookup, face_key(f));
}

double shape_regularity(const Mesh& mesh)
{
  double s = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c)
    s = std::max(s, mesh.cell_diameter(c) / mesh.cell_inradius(c));
  return s;
}

std::vector<int> vertex_patch(const Mesh& mesh, int cell)
{
  if (cell < 0 or cell >= mesh.num_cells())
    throw Error("cell id out of range: " + std::to_string(cell));
  std::vector<int> patch;
  for (int v : mesh.cells()[cell])
    for (int c : mesh.vertex_cells()[v])
      patch.push_back(c);
  std::sort(patch.begin(), patch.end());
  patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
  return patch;
}

namespace
{

// Appends the Kuhn tetrahedra of grid cube (i,j,k); vertex order follows
// the monotone lattice path from the min corner to the max corner.
template <typename Index>
void kuhn_cube(int i, int j, int k, Index idx,
               std::vector<std::array<int, 4>>& cells)
{
  static constexpr std::array<std::array<int, 3>, 6> perms
      = {{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (const auto& p : perms)
  {
    std::array<int, 3> pos = {i, j, k};
    std::array<int, 4> cell;
    cell[0] = idx(pos[0], pos[1], pos[2]);
    for (int s = 0; s < 3; ++s)
    {
      ++pos[p[s]];
      cell[s + 1] = idx(pos[0], pos[1], pos[2]);
    }
    cells.push_back(cell);
  }
}

} // namespace

Mesh unit_cube_mesh(int n)
{
  if (n < 1)
    throw Error("unit_cube_mesh requires n >= 1");
  const int m = n + 1;
  std::vector<Vec3> x;
  x.reserve(m * m * m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        x.emplace_back(double(i) / n, double(j) / n, double(k) / n);
  auto idx = [m](int i, int j, int k) { return i + m * (j + m * k); };
  std::vector<std::array<int, 4>> cells;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        kuhn_cube(i, j, k, idx, cells);
  return Mesh(std::move(x), std::move(cells));
}

Mesh l_prism_mesh(int n)
{
  if (n < 1)
    throw Error("l_prism_mesh requires n >= 1");
  const int mx = 2 * n + 1, mz = n + 1;
  auto gidx = [mx](int i, int j, int k) { return i + mx * (j + mx * k); };
  std::vector<std::array<int, 4>> cells;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < 2 * n; ++j)
      for (int i = 0; i < 2 * n; ++i)
        if (i < n or j < n)
          kuhn_cube(i, j, k, gidx, cells);

  // compact away unused grid points
  std::vector<int> renum(mx * mx * mz, -1);
  std::vector<Vec3> x;
  for (auto& c : cells)
    for (int& v : c)
    {
      if (renum[v] < 0)
      {
        const int i = v % mx, j = (v / mx) % mx, k = v / (mx * mx);
        renum[v] = static_cast<int>(x.size());
        x.emplace_back(double(i) / n, double(j) / n, double(k) / n);
      }
      v = renum[v];
    }
  return Mesh(std::move(x), std::move(cells));
}

} // namespace tracelift
