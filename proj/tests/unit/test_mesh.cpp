#include <doctest.h>

#include "tracelift/mesh.h"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

using namespace tracelift;

namespace
{

// Independent enumeration of faces and edges from the raw cell list.
struct BruteCounts
{
  std::map<std::array<int, 3>, int> faces;
  std::set<std::array<int, 2>> edges;
};

BruteCounts brute(const Mesh& m)
{
  BruteCounts b;
  for (const auto& c : m.cells())
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
      {
        b.edges.insert({std::min(c[i], c[j]), std::max(c[i], c[j])});
        for (int k = j + 1; k < 4; ++k)
        {
          std::array<int, 3> f = {c[i], c[j], c[k]};
          std::sort(f.begin(), f.end());
          ++b.faces[f];
        }
      }
  return b;
}

bool conforming(const Mesh& m)
{
  for (auto& [f, n] : brute(m).faces)
    if (n > 2)
      return false;
  // no vertex may lie in the interior of another cell's edge
  for (const auto& e : brute(m).edges)
  {
    const Vec3 a = m.vertices()[e[0]], b = m.vertices()[e[1]];
    const Vec3 mid = 0.5 * (a + b);
    for (const auto& x : m.vertices())
      if ((x - mid).norm() < 1e-12)
        return false;
  }
  return true;
}

// Sphere-fit inradius: incenter from area-weighted vertices, then the
// distance to each face plane.
double sphere_fit_inradius(const std::array<Vec3, 4>& v, double& spread)
{
  std::array<double, 4> area;
  for (int i = 0; i < 4; ++i)
  {
    std::array<Vec3, 3> f;
    for (int j = 0, m = 0; j < 4; ++j)
      if (j != i)
        f[m++] = v[j];
    area[i] = 0.5 * (f[1] - f[0]).cross(f[2] - f[0]).norm();
  }
  Vec3 c = Vec3::Zero();
  double s = 0;
  for (int i = 0; i < 4; ++i)
  {
    c += area[i] * v[i];
    s += area[i];
  }
  c /= s;
  double lo = 1e300, hi = 0;
  for (int i = 0; i < 4; ++i)
  {
    std::array<Vec3, 3> f;
    for (int j = 0, m = 0; j < 4; ++j)
      if (j != i)
        f[m++] = v[j];
    Vec3 n = (f[1] - f[0]).cross(f[2] - f[0]).normalized();
    const double d = std::abs(n.dot(c - f[0]));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  spread = hi - lo;
  return lo;
}

Mesh single_tet_json(bool swapped)
{
  std::string s = swapped ? R"({"vertices": [[0,0,0],[0,1,0],[1,0,0],[0,0,1]],
                                "cells": [[0,1,2,3]]})"
                          : R"({"vertices": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
                                "cells": [[0,1,2,3]]})";
  std::istringstream in(s);
  return load_mesh(in, MeshFormat::internal_json);
}

} // namespace

TEST_CASE("single tet from json")
{
  Mesh m = single_tet_json(false);
  CHECK(m.num_cells() == 1);
  CHECK(m.boundary_faces().size() == 4);
  CHECK(m.num_edges() == 6);
  CHECK(m.cell_volume(0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("inverted cell is reoriented")
{
  Mesh m = single_tet_json(true);
  CHECK(m.cell_volume(0) == doctest::Approx(1.0 / 6.0));
  const auto& c = m.cells()[0];
  Eigen::Matrix3d J;
  for (int i = 0; i < 3; ++i)
    J.col(i) = m.vertices()[c[i + 1]] - m.vertices()[c[0]];
  CHECK(J.determinant() > 0);
}

TEST_CASE("gmsh loader")
{
  const std::string head = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
                           "$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n"
                           "$EndNodes\n";
  SUBCASE("tet with ignored triangle")
  {
    std::istringstream in(head
                          + "$Elements\n2\n1 2 2 0 1 1 2 3\n"
                            "2 4 2 0 1 1 2 3 4\n$EndElements\n");
    Mesh m = load_mesh(in, MeshFormat::gmsh22);
    CHECK(m.num_cells() == 1);
    CHECK(m.num_faces() == 4);
  }
  SUBCASE("hexahedron rejected")
  {
    std::istringstream in(head
                          + "$Elements\n1\n1 5 2 0 1 1 2 3 4 1 2 3 4\n"
                            "$EndElements\n");
    try
    {
      load_mesh(in, MeshFormat::gmsh22);
      FAIL("expected error");
    }
    catch (const MeshError& e)
    {
      CHECK(e.kind() == MeshError::Kind::NonTetCell);
      CHECK(std::string(e.what()).find("non-tet cell") != std::string::npos);
    }
  }
  SUBCASE("garbage")
  {
    std::istringstream in("$Nodes\nxyz\n");
    try
    {
      load_mesh(in, MeshFormat::gmsh22);
      FAIL("expected error");
    }
    catch (const MeshError& e)
    {
      CHECK(e.kind() == MeshError::Kind::Parse);
    }
  }
}

TEST_CASE("hanging face is rejected")
{
  // Cube split into two prisms: one half as 3 Kuhn tets, the other cut
  // so that the shared square diagonal disagrees.
  std::vector<Vec3> x = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1},
                         {1, 1, 1}};
  std::vector<std::array<int, 4>> c = {{0, 1, 2, 3}, {1, 2, 3, 4}};
  Mesh ok(x, c);
  CHECK(ok.num_faces() == 7);

  // three cells on one face
  x.push_back({-1, -1, -1});
  c.push_back({0, 1, 2, 5});
  c.push_back({0, 1, 2, 4});
  CHECK_THROWS_AS(Mesh(x, c), MeshError);

  // a face split in two on one side only
  std::vector<Vec3> y = {{0, 0, 0}, {2, 0, 0}, {0, 2, 0}, {0, 0, 1},
                         {0, 0, -1}, {1, 0, 0}};
  std::vector<std::array<int, 4>> d = {{0, 1, 2, 3}, {0, 5, 2, 4},
                                       {5, 1, 2, 4}};
  try
  {
    Mesh bad(y, d);
    FAIL("expected error");
  }
  catch (const MeshError& e)
  {
    CHECK(e.kind() == MeshError::Kind::NonConforming);
  }
}

TEST_CASE("degenerate cell")
{
  std::vector<Vec3> x = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  try
  {
    Mesh m(x, {{0, 1, 2, 3}});
    FAIL("expected error");
  }
  catch (const MeshError& e)
  {
    CHECK(e.kind() == MeshError::Kind::Degenerate);
  }
}

TEST_CASE("unit cube counts")
{
  Mesh m1 = unit_cube_mesh(1);
  CHECK(m1.num_vertices() == 8);
  CHECK(m1.num_cells() == 6);
  auto b = brute(m1);
  CHECK(b.faces.size() == 18);
  CHECK(b.edges.size() == 19);
  CHECK(m1.num_faces() == 18);
  CHECK(m1.num_edges() == 19);
  CHECK(m1.num_vertices() - m1.num_edges() + m1.num_faces() - m1.num_cells()
        == 1);

  for (int n : {2, 3})
  {
    Mesh m = unit_cube_mesh(n);
    CHECK(m.num_cells() == 6 * n * n * n);
    CHECK(m.num_vertices() == (n + 1) * (n + 1) * (n + 1));
    auto bb = brute(m);
    CHECK(m.num_faces() == static_cast<int>(bb.faces.size()));
    CHECK(m.num_edges() == static_cast<int>(bb.edges.size()));
    CHECK(m.num_vertices() - m.num_edges() + m.num_faces() - m.num_cells()
          == 1);
    CHECK(m.volume() == doctest::Approx(1.0));
  }
}

TEST_CASE("l prism")
{
  Mesh m = l_prism_mesh(1);
  CHECK(m.num_cells() == 18);
  CHECK(m.volume() == doctest::Approx(3.0));
  CHECK(m.num_vertices() - m.num_edges() + m.num_faces() - m.num_cells()
        == 1);
  CHECK(conforming(m));
  Mesh m2 = l_prism_mesh(2);
  CHECK(m2.num_cells() == 144);
}

TEST_CASE("face invariants")
{
  Mesh m = unit_cube_mesh(2);
  for (int f = 0; f < m.num_faces(); ++f)
  {
    const auto& fc = m.face_cells()[f];
    CHECK(fc[0] >= 0);
    const auto& fv = m.faces()[f];
    CHECK(fv[0] < fv[1]);
    CHECK(fv[1] < fv[2]);
  }
  for (int c = 0; c < m.num_cells(); ++c)
    CHECK(m.cell_volume(c) > 0);
}

TEST_CASE("shape regularity")
{
  SUBCASE("regular tetrahedron")
  {
    std::vector<Vec3> x
        = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    Mesh m(x, {{0, 1, 2, 3}});
    const double expect = 2.0 * std::sqrt(6.0);
    CHECK(shape_regularity(m) == doctest::Approx(expect).epsilon(1e-12));
    double spread;
    const double rho = sphere_fit_inradius({x[0], x[1], x[2], x[3]}, spread);
    CHECK(spread < 1e-12);
    CHECK(m.cell_diameter(0) / rho == doctest::Approx(expect));
  }
  SUBCASE("kuhn cells agree with sphere fit")
  {
    Mesh m = unit_cube_mesh(1);
    for (int c = 0; c < m.num_cells(); ++c)
    {
      std::array<Vec3, 4> v;
      for (int i = 0; i < 4; ++i)
        v[i] = m.vertices()[m.cells()[c][i]];
      double spread;
      CHECK(m.cell_inradius(c)
            == doctest::Approx(sphere_fit_inradius(v, spread)));
      CHECK(spread < 1e-12);
    }
  }
  SUBCASE("independent of n")
  {
    const double s1 = shape_regularity(unit_cube_mesh(1));
    CHECK(shape_regularity(unit_cube_mesh(2)) == doctest::Approx(s1));
    CHECK(shape_regularity(unit_cube_mesh(4)) == doctest::Approx(s1));
  }
}

TEST_CASE("uniform refinement")
{
  Mesh m0 = unit_cube_mesh(1);
  Mesh m1 = refine(m0, RefineMode::uniform);
  CHECK(m1.num_cells() == 48);
  CHECK(m1.num_vertices() == 27);
  CHECK(conforming(m1));
  CHECK(shape_regularity(m1) == doctest::Approx(shape_regularity(m0)));
  CHECK(m1.volume() == doctest::Approx(1.0));
  for (int c = 0; c < m1.num_cells(); ++c)
  {
    const int p = m1.parents()[c];
    // child centroid lies in the parent cell
    CHECK(p >= 0);
    CHECK(p < m0.num_cells());
  }
  Mesh m2 = refine(m1, RefineMode::uniform);
  CHECK(m2.num_cells() == 384);
  CHECK(shape_regularity(m2) == doctest::Approx(shape_regularity(m0)));
}

TEST_CASE("local bisection")
{
  Mesh m0 = unit_cube_mesh(1);
  Mesh m1 = refine(m0, RefineMode::bisection, {2});
  CHECK(m1.num_cells() > 6);
  CHECK(m1.num_cells() < 48);
  CHECK(conforming(m1));
  CHECK(m1.volume() == doctest::Approx(1.0));

  Mesh l = l_prism_mesh(1);
  Mesh l1 = refine(l, RefineMode::bisection, {0, 7});
  CHECK(conforming(l1));
  CHECK(l1.volume() == doctest::Approx(3.0));
}

TEST_CASE("graded refinement toward a vertex stays shape regular")
{
  Mesh m = unit_cube_mesh(1);
  const double s0 = shape_regularity(m);
  const Vec3 corner(1, 0, 0);
  double ratio = m.h_min() / m.h_max();
  for (int level = 0; level < 10; ++level)
  {
    std::set<int> marked;
    for (int c = 0; c < m.num_cells(); ++c)
      for (int v : m.cells()[c])
        if ((m.vertices()[v] - corner).norm() < 1e-14)
          marked.insert(c);
    m = refine(m, RefineMode::bisection, marked);
    const double r = m.h_min() / m.h_max();
    CHECK(r < ratio + 1e-15);
    ratio = r;
    CHECK(shape_regularity(m) <= 3.0 * s0);
    for (int c = 0; c < m.num_cells(); ++c)
      CHECK(m.cell_volume(c) > 0);
  }
  CHECK(ratio < 0.2);
  CHECK(conforming(m));
  CHECK(m.volume() == doctest::Approx(1.0));
}

TEST_CASE("vertex patch")
{
  Mesh m1 = unit_cube_mesh(1);
  for (int c = 0; c < 6; ++c)
    CHECK(vertex_patch(m1, c).size() == 6);

  Mesh m2 = unit_cube_mesh(2);
  for (int c = 0; c < m2.num_cells(); ++c)
  {
    std::set<int> oracle;
    for (int d = 0; d < m2.num_cells(); ++d)
      for (int a : m2.cells()[c])
        for (int b : m2.cells()[d])
          if (a == b)
            oracle.insert(d);
    auto p = vertex_patch(m2, c);
    CHECK(std::vector<int>(oracle.begin(), oracle.end()) == p);
  }
  CHECK(vertex_patch(m2, 0).size() < 48u);

  Mesh t = single_tet_json(false);
  CHECK(vertex_patch(t, 0) == std::vector<int>{0});
  CHECK_THROWS_AS(vertex_patch(t, 3), Error);
}

TEST_CASE("boundary triangulation")
{
  for (auto mp : {std::make_shared<const Mesh>(unit_cube_mesh(1)),
                  std::make_shared<const Mesh>(unit_cube_mesh(3)),
                  std::make_shared<const Mesh>(l_prism_mesh(1)),
                  std::make_shared<const Mesh>(single_tet_json(false))})
  {
    SurfaceMesh s = boundary_triangulation(mp);
    Vec3 sum = Vec3::Zero();
    for (int t = 0; t < s.num_triangles(); ++t)
    {
      sum += s.area(t) * s.normal(t);
      // outward: owner's opposite vertex lies behind the face
      const auto& tv = s.triangle(t);
      const Vec3 xc = mp->cell_centroid(s.owner_cell(t));
      CHECK(s.normal(t).dot(xc - mp->vertices()[tv[0]]) < 0);
      CHECK(std::abs(s.t1(t).dot(s.normal(t))) < 1e-14);
      CHECK(std::abs(s.t2(t).dot(s.t1(t))) < 1e-14);
      const Vec3 p = s.point(t, Eigen::Vector3d(0.2, 0.3, 0.5));
      CHECK(std::abs(s.tangential_position(t, p).dot(s.normal(t))) < 1e-14);
    }
    CHECK(sum.norm() <= 1e-12 * s.total_area());
    // Euler for a sphere
    CHECK(s.num_vertices() - s.num_edges() + s.num_triangles() == 2);
  }
  auto cube = std::make_shared<const Mesh>(unit_cube_mesh(1));
  CHECK(boundary_triangulation(cube).num_triangles() == 12);
  CHECK(boundary_triangulation(cube).total_area() == doctest::Approx(6.0));
  auto tet = std::make_shared<const Mesh>(single_tet_json(false));
  SurfaceMesh st = boundary_triangulation(tet);
  CHECK(st.num_triangles() == 4);
  CHECK(st.total_area() == doctest::Approx(1.5 + std::sqrt(3.0) / 2.0));
}
