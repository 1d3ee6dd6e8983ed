#pragma once

#include "tracelift/common.h"

#include <array>
#include <istream>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace tracelift
{

class MeshError : public Error
{
public:
  enum class Kind
  {
    Parse,
    NonTetCell,
    NonConforming,
    Degenerate,
    Io
  };

  MeshError(Kind kind, const std::string& msg) : Error(msg), _kind(kind) {}

  Kind kind() const { return _kind; }

private:
  Kind _kind;
};

/// Conforming tetrahedral mesh. Immutable after construction.
///
/// Faces and edges store sorted vertex ids (ascending global orientation).
/// Local face i of a cell is opposite local vertex i; local edges follow
/// (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
class Mesh
{
public:
  /// Builds connectivity from raw cells. Cells with negative volume are
  /// reoriented by swapping their last two vertices. `tags` and
  /// `bisection` carry the bisection state (see refine); empty vectors
  /// select tag 3 and the given cell vertex order.
  Mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> cells,
       std::vector<int> tags = {}, std::vector<int> parents = {},
       std::vector<std::array<int, 4>> bisection = {});

  int num_vertices() const { return static_cast<int>(_vertices.size()); }
  int num_cells() const { return static_cast<int>(_cells.size()); }
  int num_faces() const { return static_cast<int>(_faces.size()); }
  int num_edges() const { return static_cast<int>(_edges.size()); }

  const std::vector<Vec3>& vertices() const { return _vertices; }
  const std::vector<std::array<int, 4>>& cells() const { return _cells; }
  const std::vector<std::array<int, 3>>& faces() const { return _faces; }
  const std::vector<std::array<int, 2>>& edges() const { return _edges; }

  /// [owner, neighbour]; neighbour is -1 on the boundary.
  const std::vector<std::array<int, 2>>& face_cells() const
  {
    return _face_cells;
  }
  const std::vector<std::array<int, 4>>& cell_faces() const
  {
    return _cell_faces;
  }
  const std::vector<std::array<int, 6>>& cell_edges() const
  {
    return _cell_edges;
  }
  const std::vector<int>& boundary_faces() const { return _boundary_faces; }
  bool is_boundary_face(int f) const { return _face_cells[f][1] < 0; }

  /// Unit face normal. Interior faces: (v1-v0)x(v2-v0) of the sorted
  /// vertices. Boundary faces: outward.
  const Vec3& face_normal(int f) const { return _face_normals[f]; }
  double face_area(int f) const { return _face_areas[f]; }
  double face_diameter(int f) const;
  double edge_length(int e) const;

  double cell_volume(int c) const { return _cell_volumes[c]; }
  double cell_diameter(int c) const { return _cell_diameters[c]; }
  double cell_inradius(int c) const;
  Vec3 cell_centroid(int c) const;

  /// Maps barycentric coordinates on cell c to physical space.
  Vec3 point(int c, const Bary& lambda) const;

  /// Bisection bookkeeping: vertex order as passed to the constructor
  /// (before reorientation), tag in {1,2,3} per cell, and the parent cell
  /// in the mesh this one was refined from (identity otherwise).
  const std::vector<std::array<int, 4>>& bisection_vertices() const
  {
    return _bisect;
  }
  const std::vector<int>& tags() const { return _tags; }
  const std::vector<int>& parents() const { return _parents; }

  double volume() const;
  double h_min() const;
  double h_max() const;

  /// Cells incident to each vertex.
  const std::vector<std::vector<int>>& vertex_cells() const
  {
    return _vertex_cells;
  }

  /// Looks up an edge or face by its vertex ids (any order); -1 if absent.
  int find_edge(int a, int b) const;
  int find_face(int a, int b, int c) const;

private:
  std::vector<Vec3> _vertices;
  std::vector<std::array<int, 4>> _cells;
  std::vector<std::array<int, 3>> _faces;
  std::vector<std::array<int, 2>> _edges;
  std::vector<std::array<int, 2>> _face_cells;
  std::vector<std::array<int, 4>> _cell_faces;
  std::vector<std::array<int, 6>> _cell_edges;
  std::vector<int> _boundary_faces;
  std::vector<Vec3> _face_normals;
  std::vector<double> _face_areas;
  std::vector<double> _cell_volumes;
  std::vector<double> _cell_diameters;
  std::vector<std::array<int, 4>> _bisect;
  std::vector<int> _tags;
  std::vector<int> _parents;
  std::vector<std::vector<int>> _vertex_cells;
  std::vector<std::pair<std::uint64_t, int>> _edge_lookup;
  std::vector<std::pair<std::uint64_t, int>> _face_lookup;
};

/// Local edge vertex pairs.
inline constexpr std::array<std::array<int, 2>, 6> kCellEdges
    = {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

enum class MeshFormat
{
  gmsh22,
  internal_json
};

Mesh load_mesh(std::istream& in, MeshFormat format);
Mesh load_mesh_file(const std::string& path);

/// Kuhn decomposition of an n x n x n grid of the unit cube.
Mesh unit_cube_mesh(int n);

/// L-shaped prism ([0,2]^2 minus [1,2]^2) x [0,1], each unit cube split
/// into n^3 Kuhn-decomposed subcubes.
Mesh l_prism_mesh(int n);

enum class RefineMode
{
  uniform,
  bisection
};

/// Newest-vertex bisection with conforming closure. Uniform mode bisects
/// every cell three times, which gives 8 children per cell.
Mesh refine(const Mesh& mesh, RefineMode mode, const std::set<int>& marked = {});

/// max_K h_K / rho_K.
double shape_regularity(const Mesh& mesh);

/// Cells sharing at least one vertex with `cell` (sorted, includes cell).
std::vector<int> vertex_patch(const Mesh& mesh, int cell);

/// Boundary triangulation with outward normals and per-face frames.
class SurfaceMesh
{
public:
  explicit SurfaceMesh(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return *_mesh; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return _mesh; }

  int num_triangles() const { return static_cast<int>(_faces.size()); }
  int num_edges() const { return static_cast<int>(_edges.size()); }
  int num_vertices() const { return static_cast<int>(_vertices.size()); }

  /// Mesh face id of triangle t.
  int mesh_face(int t) const { return _faces[t]; }
  /// Triangle id of a mesh face, or -1 for interior faces.
  int triangle_of_face(int f) const { return _face_to_tri[f]; }
  /// Sorted global vertex ids of triangle t.
  const std::array<int, 3>& triangle(int t) const { return _triangles[t]; }
  const Vec3& normal(int t) const { return _normals[t]; }
  double area(int t) const { return _areas[t]; }
  double diameter(int t) const { return _diameters[t]; }
  int owner_cell(int t) const { return _owner[t]; }

  /// Boundary edges (sorted global vertex ids) and their mesh edge ids.
  const std::vector<std::array<int, 2>>& edges() const { return _edges; }
  int mesh_edge(int e) const { return _mesh_edges[e]; }
  int edge_of_mesh_edge(int me) const { return _medge_to_edge[me]; }
  /// Triangle edge ids in local order (0,1),(0,2),(1,2) of the sorted
  /// triangle vertices.
  const std::array<int, 3>& triangle_edges(int t) const
  {
    return _triangle_edges[t];
  }
  /// Global ids of boundary vertices.
  const std::vector<int>& vertices() const { return _vertices; }

  /// Orthonormal tangent frame: t1 along the first triangle edge,
  /// t2 = n x t1.
  const Vec3& t1(int t) const { return _t1[t]; }
  const Vec3& t2(int t) const { return _t2[t]; }

  Vec3 point(int t, const Eigen::Vector3d& lambda) const;

  /// x - (x.n) n on triangle t.
  Vec3 tangential_position(int t, const Vec3& x) const;

  double total_area() const { return _total_area; }

private:
  std::shared_ptr<const Mesh> _mesh;
  std::vector<int> _faces;
  std::vector<int> _face_to_tri;
  std::vector<std::array<int, 3>> _triangles;
  std::vector<Vec3> _normals, _t1, _t2;
  std::vector<double> _areas, _diameters;
  std::vector<int> _owner;
  std::vector<std::array<int, 2>> _edges;
  std::vector<int> _mesh_edges;
  std::vector<int> _medge_to_edge;
  std::vector<std::array<int, 3>> _triangle_edges;
  std::vector<int> _vertices;
  double _total_area = 0.0;
};

SurfaceMesh boundary_triangulation(std::shared_ptr<const Mesh> mesh);

} // namespace tracelift
