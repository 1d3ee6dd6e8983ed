#include <doctest.h>

#include "tracelift/fe_space.h"
#include "tracelift/quadrature.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace tracelift;

namespace
{

std::shared_ptr<const Mesh> cube(int n)
{
  return std::make_shared<const Mesh>(unit_cube_mesh(n));
}

std::shared_ptr<const Mesh> graded()
{
  Mesh m = unit_cube_mesh(1);
  for (int l = 0; l < 3; ++l)
  {
    std::set<int> mk;
    for (int c = 0; c < m.num_cells(); ++c)
      for (int v : m.cells()[c])
        if (m.vertices()[v].norm() < 1e-14)
          mk.insert(c);
    m = refine(m, RefineMode::bisection, mk);
  }
  return std::make_shared<const Mesh>(m);
}

Eigen::VectorXd random_vector(int n, unsigned seed)
{
  std::mt19937 rng(seed);
  std::normal_distribution<double> N;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i)
    v[i] = N(rng);
  return v;
}

Eigen::VectorXd local(const FESpace& s, int e, const Eigen::VectorXd& c)
{
  Eigen::VectorXd l(s.num_local_dofs());
  for (int i = 0; i < l.size(); ++i)
    l[i] = c[s.entity_dofs(e)[i]];
  return l;
}

Eigen::VectorXd value_at(const FESpace& s, int e, const Eigen::VectorXd& c,
                         const Vec3& x, Deriv d = Deriv::Value)
{
  return s.eval(e, {x}, d) * local(s, e, c);
}

// Field evaluating an FE function on the entity requested by the caller.
Field as_field(const FESpace& s, const Eigen::VectorXd& c)
{
  return [&s, c](const Vec3& x, int e) { return value_at(s, e, c, x); };
}

double l2_error(const FESpace& s, const Eigen::VectorXd& c,
                const std::function<Eigen::VectorXd(const Vec3&)>& f)
{
  double err = 0;
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int e = 0; e < s.num_entities(); ++e)
  {
    entity_quadrature(s, e, 8, x, w);
    Eigen::MatrixXd B = s.eval(e, x);
    Eigen::VectorXd v = B * local(s, e, c);
    const int vs = s.value_size();
    for (std::size_t q = 0; q < x.size(); ++q)
      err += w[q] * (v.segment(vs * q, vs) - f(x[q])).squaredNorm();
  }
  return std::sqrt(err);
}

} // namespace

TEST_CASE("dof counts")
{
  std::istringstream in(R"({"vertices": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
                            "cells": [[0,1,2,3]]})");
  auto tet = std::make_shared<const Mesh>(load_mesh(in, MeshFormat::internal_json));
  CHECK(FESpace::create(tet, Family::RaviartThomas, 0)->dim() == 4);
  CHECK(FESpace::create(tet, Family::RaviartThomas, 1)->dim() == 15);
  CHECK(FESpace::create(tet, Family::Nedelec1, 0)->dim() == 6);
  CHECK(FESpace::create(tet, Family::Nedelec1, 1)->dim() == 20);
  CHECK(FESpace::create(tet, Family::Lagrange, 0)->dim() == 4);
  CHECK(FESpace::create(tet, Family::Lagrange, 1)->dim() == 10);
  CHECK(FESpace::create(tet, Family::Lagrange, 2)->dim() == 20);

  auto m = cube(1);
  auto s = std::make_shared<const SurfaceMesh>(m);
  CHECK(FESpace::create(m, Family::Nedelec1, 0)->dim() == m->num_edges());
  CHECK(FESpace::create(m, Family::Nedelec1, 0)->dim() == 19);
  CHECK(FESpace::create(s, Family::SurfaceDG, 0)->dim() == 12);
  CHECK(FESpace::create(s, Family::SurfaceDG, 1)->dim() == 36);
  CHECK(FESpace::create(s, Family::SurfaceRT, 0)->dim() == s->num_edges());
  CHECK(FESpace::create(s, Family::SurfaceRT, 1)->dim()
        == 2 * s->num_edges() + 2 * 12);
  CHECK(FESpace::create(s, Family::SurfaceLagrange, 0)->dim() == 8);
  CHECK(FESpace::create(m, Family::Lagrange, 1)->dim()
        == m->num_vertices() + m->num_edges());
  CHECK(FESpace::create(m, Family::RaviartThomas, 1)->dim()
        == 3 * m->num_faces() + 3 * m->num_cells());
  CHECK(FESpace::create(m, Family::DG, 1)->dim() == 24);

  CHECK_THROWS_AS(FESpace::create(m, Family::RaviartThomas, 2), Error);
  CHECK_THROWS_AS(FESpace::create(m, Family::SurfaceDG, 0), Error);
  CHECK_THROWS_AS(FESpace::create(s, Family::DG, 0), Error);
}

TEST_CASE("local duality")
{
  auto m = graded();
  auto s = std::make_shared<const SurfaceMesh>(m);
  for (int k : {0, 1})
  {
    std::vector<SpacePtr> spaces = {
        FESpace::create(m, Family::RaviartThomas, k),
        FESpace::create(m, Family::Nedelec1, k),
        FESpace::create(m, Family::Lagrange, k),
        FESpace::create(m, Family::DG, k),
        FESpace::create(s, Family::SurfaceDG, k),
        FESpace::create(s, Family::SurfaceRT, k),
        FESpace::create(s, Family::SurfaceLagrange, k)};
    for (const auto& sp : spaces)
    {
      double worst = 0;
      for (int e = 0; e < sp->num_entities(); ++e)
      {
        LocalDofs ld = sp->local_dofs(e);
        Eigen::MatrixXd V = ld.weights * sp->eval(e, ld.points);
        worst = std::max(
            worst,
            (V - Eigen::MatrixXd::Identity(V.rows(), V.cols())).cwiseAbs().maxCoeff());
      }
      INFO(to_string(sp->family()), " k=", k);
      CHECK(worst < 1e-10);
    }
  }
}

TEST_CASE("conformity jumps")
{
  auto m = graded();
  const auto& tri = quadrature::triangle(4);
  for (int k : {0, 1})
    for (Family fam : {Family::RaviartThomas, Family::Nedelec1,
                       Family::Lagrange})
    {
      auto sp = FESpace::create(m, fam, k);
      Eigen::VectorXd c = random_vector(sp->dim(), 7 + k);
      double jump = 0;
      for (int f = 0; f < m->num_faces(); ++f)
      {
        const auto& fc = m->face_cells()[f];
        if (fc[1] < 0)
          continue;
        const auto& fv = m->faces()[f];
        const Vec3 n = m->face_normal(f);
        for (std::size_t q = 0; q < tri.size(); ++q)
        {
          const auto& l = tri.points[q];
          const Vec3 x = l[0] * m->vertices()[fv[0]] + l[1] * m->vertices()[fv[1]]
                         + l[2] * m->vertices()[fv[2]];
          Eigen::VectorXd a = value_at(*sp, fc[0], c, x);
          Eigen::VectorXd b = value_at(*sp, fc[1], c, x);
          Eigen::VectorXd d = a - b;
          double j;
          if (fam == Family::RaviartThomas)
            j = std::abs(Vec3(d).dot(n));
          else if (fam == Family::Nedelec1)
            j = (Vec3(d) - Vec3(d).dot(n) * n).norm();
          else
            j = std::abs(d[0]);
          jump = std::max(jump, j);
        }
      }
      INFO(to_string(fam), " k=", k);
      CHECK(jump <= 1e-10 * c.norm());
    }
}

TEST_CASE("surface conformity")
{
  auto m = graded();
  auto s = std::make_shared<const SurfaceMesh>(m);
  for (int k : {0, 1})
  {
    auto rt = FESpace::create(s, Family::SurfaceRT, k);
    auto lg = FESpace::create(s, Family::SurfaceLagrange, k);
    Eigen::VectorXd c = random_vector(rt->dim(), 3);
    Eigen::VectorXd d = random_vector(lg->dim(), 4);
    std::vector<std::vector<int>> edge_tris(s->num_edges());
    for (int t = 0; t < s->num_triangles(); ++t)
      for (int e : s->triangle_edges(t))
        edge_tris[e].push_back(t);
    double jump = 0, ljump = 0;
    for (int e = 0; e < s->num_edges(); ++e)
    {
      REQUIRE(edge_tris[e].size() == 2);
      const auto& ev = s->edges()[e];
      const Vec3 a = m->vertices()[ev[0]], b = m->vertices()[ev[1]];
      const Vec3 t = (b - a).normalized();
      for (double sp : {0.1, 0.5, 0.8})
      {
        const Vec3 x = (1 - sp) * a + sp * b;
        const int t0 = edge_tris[e][0], t1 = edge_tris[e][1];
        const Vec3 r0 = value_at(*rt, t0, c, x), r1 = value_at(*rt, t1, c, x);
        const double f0 = r0.dot(t.cross(s->normal(t0)));
        const double f1 = r1.dot(t.cross(s->normal(t1)));
        jump = std::max(jump, std::abs(f0 - f1));
        ljump = std::max(ljump, std::abs(value_at(*lg, t0, d, x)[0]
                                         - value_at(*lg, t1, d, x)[0]));
        // values are tangential
        CHECK(std::abs(r0.dot(s->normal(t0))) < 1e-12 * c.norm());
      }
    }
    CHECK(jump <= 1e-10 * c.norm());
    CHECK(ljump <= 1e-10 * d.norm());
  }
}

TEST_CASE("interpolation reproduces the space")
{
  auto m = graded();
  auto s = std::make_shared<const SurfaceMesh>(m);
  for (int k : {0, 1})
    for (SpacePtr sp : {FESpace::create(m, Family::RaviartThomas, k),
                        FESpace::create(m, Family::Nedelec1, k),
                        FESpace::create(m, Family::Lagrange, k),
                        FESpace::create(m, Family::DG, k),
                        FESpace::create(s, Family::SurfaceRT, k),
                        FESpace::create(s, Family::SurfaceDG, k),
                        FESpace::create(s, Family::SurfaceLagrange, k)})
    {
      Eigen::VectorXd c = random_vector(sp->dim(), 11);
      Eigen::VectorXd r = interpolate(*sp, as_field(*sp, c));
      INFO(to_string(sp->family()), " k=", k);
      CHECK((r - c).norm() <= 1e-10 * c.norm());
    }
}

TEST_CASE("rt interpolation of special fields")
{
  auto m = cube(2);
  for (int k : {0, 1})
  {
    auto V = FESpace::create(m, Family::RaviartThomas, k);
    const Vec3 cvec(0.3, -1.2, 2.0);
    FEFunction pc = rt_interpolate(V, vector_field([&](const Vec3&) { return cvec; }));
    FEFunction px = rt_interpolate(V, vector_field([](const Vec3& x) { return x; }));
    // curl of (yz, xz^2, x y^2) is (2xy - 2xz, y - y^2, z^2 - z)
    FEFunction pcurl = rt_interpolate(V, vector_field([](const Vec3& x) {
      return Vec3(2 * x[0] * x[1] - 2 * x[0] * x[2], x[1] - x[1] * x[1],
                  x[2] * x[2] - x[2]);
    }));
    const auto& tet = quadrature::tetrahedron(3);
    double ec = 0, ed = 0, e0 = 0;
    for (int c = 0; c < m->num_cells(); ++c)
      for (std::size_t q = 0; q < tet.size(); ++q)
      {
        const Vec3 x = m->point(c, tet.points[q]);
        ec = std::max(ec, (value_at(*V, c, pc.coeffs(), x) - cvec).norm());
        ed = std::max(ed, std::abs(value_at(*V, c, px.coeffs(), x, Deriv::Div)[0] - 3.0));
        e0 = std::max(e0, std::abs(value_at(*V, c, pcurl.coeffs(), x, Deriv::Div)[0]));
      }
    CHECK(ec < 1e-12);
    CHECK(ed < 1e-10);
    CHECK(e0 < 1e-10);
  }
}

TEST_CASE("rt approximation order")
{
  for (int k : {0, 1})
  {
    std::vector<double> err;
    for (int n : {2, 4, 8})
    {
      auto V = FESpace::create(cube(n), Family::RaviartThomas, k);
      auto f = [](const Vec3& x) -> Eigen::VectorXd {
        return Vec3(std::sin(std::numbers::pi * x[0]), 0, 0);
      };
      Eigen::VectorXd c = interpolate(*V, [&](const Vec3& x, int) { return f(x); });
      err.push_back(l2_error(*V, c, f));
    }
    const double order = std::log2(err[1] / err[2]);
    INFO("k=", k, " errors ", err[0], " ", err[1], " ", err[2]);
    CHECK(order >= 0.9 * (k + 1));
    CHECK(std::log2(err[0] / err[1]) >= 0.9 * (k + 1));
  }
}

TEST_CASE("dg projection and evaluation")
{
  std::istringstream in(R"({"vertices": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
                            "cells": [[0,1,2,3]]})");
  auto tet = std::make_shared<const Mesh>(load_mesh(in, MeshFormat::internal_json));
  auto U = FESpace::create(tet, Family::DG, 0);
  FEFunction p = l2_project_dg(U, scalar_field([](const Vec3& x) { return x[0]; }));
  Eigen::Vector4d ref(0.1, 0.2, 0.3, 0.4);
  CHECK(evaluate(p, 0, ref)[0] == doctest::Approx(0.25));

  auto m = cube(2);
  auto U1 = FESpace::create(m, Family::DG, 1);
  FEFunction one = l2_project_dg(U1, scalar_field([](const Vec3&) { return 1.0; }));
  for (int c = 0; c < m->num_cells(); ++c)
    CHECK(evaluate(one, c, ref)[0] == doctest::Approx(1.0));
  // piecewise linear reproduced
  FEFunction lin = l2_project_dg(U1, scalar_field([](const Vec3& x) {
    return 2 * x[0] - x[1] + 0.5 * x[2];
  }));
  const Vec3 x = m->point(5, ref);
  CHECK(evaluate(lin, 5, ref)[0] == doctest::Approx(2 * x[0] - x[1] + 0.5 * x[2]));
  // residual orthogonal to P1 per cell: projecting again is idempotent
  FEFunction f = l2_project_dg(U1, scalar_field([](const Vec3& y) { return std::exp(y[0] * y[1]); }));
  Eigen::VectorXd again = interpolate(*U1, as_field(*U1, f.coeffs()));
  CHECK((again - f.coeffs()).norm() < 1e-12);
}

TEST_CASE("evaluate basis functions")
{
  std::istringstream in(R"({"vertices": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
                            "cells": [[0,1,2,3]]})");
  auto tet = std::make_shared<const Mesh>(load_mesh(in, MeshFormat::internal_json));
  auto V = FESpace::create(tet, Family::RaviartThomas, 0);
  CHECK(evaluate(FEFunction(V), 0, Eigen::Vector4d(0.25, 0.25, 0.25, 0.25)).norm() == 0);
  for (int f = 0; f < 4; ++f)
  {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(4);
    c[f] = 1;
    FEFunction u(V, c);
    const auto& fv = tet->faces()[f];
    const int cell = 0;
    // face barycentre in cell coordinates
    Eigen::Vector4d ref = Eigen::Vector4d::Zero();
    for (int v : fv)
      for (int j = 0; j < 4; ++j)
        if (tet->cells()[cell][j] == v)
          ref[j] = 1.0 / 3.0;
    const double nc = Vec3(evaluate(u, cell, ref)).dot(tet->face_normal(f));
    CHECK(nc == doctest::Approx(1.0 / std::sqrt(tet->face_area(f))));
    // zero normal component on the other faces
    for (int g = 0; g < 4; ++g)
    {
      if (g == f)
        continue;
      Eigen::Vector4d r2 = Eigen::Vector4d::Zero();
      for (int v : tet->faces()[g])
        for (int j = 0; j < 4; ++j)
          if (tet->cells()[cell][j] == v)
            r2[j] = 1.0 / 3.0;
      CHECK(std::abs(Vec3(evaluate(u, cell, r2)).dot(tet->face_normal(g))) < 1e-12);
    }
  }
  auto W = FESpace::create(tet, Family::Lagrange, 0);
  for (int v = 0; v < 4; ++v)
  {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(W->dim());
    c[W->lagrange_dof(static_cast<std::uint64_t>(v))] = 1;
    Eigen::Vector4d ref = Eigen::Vector4d::Zero();
    for (int j = 0; j < 4; ++j)
      if (tet->cells()[0][j] == v)
        ref[j] = 1;
    CHECK(evaluate(FEFunction(W, c), 0, ref)[0] == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(evaluate(FEFunction(W), 1, Eigen::Vector4d(1, 0, 0, 0)), Error);
}

TEST_CASE("mean zero spaces")
{
  auto m = cube(1);
  auto s = std::make_shared<const SurfaceMesh>(m);
  auto M0 = FESpace::create(s, Family::SurfaceDG, 0, true);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(M0->dim());
  c[0] = 1;
  CHECK_THROWS_AS(FEFunction(M0, c), Error);
  c[1] = -1; // equal areas
  CHECK_NOTHROW(FEFunction(M0, c));
  CHECK(M0->integrals().sum() == doctest::Approx(std::sqrt(0.5) * 12));
  auto W = FESpace::create(m, Family::Lagrange, 1);
  CHECK(W->integrals().sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(FEFunction(W, Eigen::VectorXd::Zero(3)), Error);
}

TEST_CASE("lagrange gradients")
{
  auto m = graded();
  for (int k : {0, 1, 2})
  {
    auto W = FESpace::create(m, Family::Lagrange, k);
    auto f = [k](const Vec3& x) {
      return k == 0 ? 1 + x[0] - 2 * x[2]
                    : (k == 1 ? x[0] * x[1] - x[2] * x[2]
                              : x[0] * x[1] * x[2] + x[0] * x[0] * x[0]);
    };
    auto g = [k](const Vec3& x) {
      return k == 0 ? Vec3(1, 0, -2)
                    : (k == 1 ? Vec3(x[1], x[0], -2 * x[2])
                              : Vec3(x[1] * x[2] + 3 * x[0] * x[0],
                                     x[0] * x[2], x[0] * x[1]));
    };
    Eigen::VectorXd c = interpolate(*W, scalar_field(f));
    double err = 0;
    for (int e = 0; e < m->num_cells(); e += 7)
    {
      const Vec3 x = m->point(e, Eigen::Vector4d(0.1, 0.2, 0.3, 0.4));
      err = std::max(err, std::abs(value_at(*W, e, c, x)[0] - f(x)));
      err = std::max(err, (Vec3(value_at(*W, e, c, x, Deriv::Grad)) - g(x)).norm());
    }
    CHECK(err < 1e-12);
  }
}
