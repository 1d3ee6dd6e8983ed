#include "tracelift/mesh.h"

#include <algorithm>
#include <unordered_map>

namespace tracelift
{

SurfaceMesh::SurfaceMesh(std::shared_ptr<const Mesh> mesh)
    : _mesh(std::move(mesh))
{
  const Mesh& m = *_mesh;
  const auto& x = m.vertices();
  _face_to_tri.assign(m.num_faces(), -1);
  _medge_to_edge.assign(m.num_edges(), -1);
  std::vector<int> vmark(m.num_vertices(), 0);
  for (int f : m.boundary_faces())
  {
    const int t = static_cast<int>(_faces.size());
    _faces.push_back(f);
    _face_to_tri[f] = t;
    const auto& tv = m.faces()[f];
    _triangles.push_back(tv);
    const Vec3& n = m.face_normal(f);
    _normals.push_back(n);
    _areas.push_back(m.face_area(f));
    _diameters.push_back(m.face_diameter(f));
    _owner.push_back(m.face_cells()[f][0]);
    _total_area += m.face_area(f);
    Vec3 t1 = (x[tv[1]] - x[tv[0]]).normalized();
    _t1.push_back(t1);
    _t2.push_back(n.cross(t1));

    static constexpr std::array<std::array<int, 2>, 3> le
        = {{{0, 1}, {0, 2}, {1, 2}}};
    std::array<int, 3> te;
    for (int i = 0; i < 3; ++i)
    {
      const int a = tv[le[i][0]], b = tv[le[i][1]];
      const int me = m.find_edge(a, b);
      if (_medge_to_edge[me] < 0)
      {
        _medge_to_edge[me] = static_cast<int>(_edges.size());
        _edges.push_back({a, b});
        _mesh_edges.push_back(me);
      }
      te[i] = _medge_to_edge[me];
    }
    _triangle_edges.push_back(te);
    for (int v : tv)
      vmark[v] = 1;
  }
  for (int v = 0; v < m.num_vertices(); ++v)
    if (vmark[v])
      _vertices.push_back(v);
}

Vec3 SurfaceMesh::point(int t, const Eigen::Vector3d& lambda) const
{
  const auto& x = _mesh->vertices();
  const auto& tv = _triangles[t];
  return lambda[0] * x[tv[0]] + lambda[1] * x[tv[1]] + lambda[2] * x[tv[2]];
}

Vec3 SurfaceMesh::tangential_position(int t, const Vec3& x) const
{
  const Vec3& n = _normals[t];
  return x - x.dot(n) * n;
}

SurfaceMesh boundary_triangulation(std::shared_ptr<const Mesh> mesh)
{
  return SurfaceMesh(std::move(mesh));
}

} // namespace tracelift
