#include <doctest.h>

#include "tracelift/boundary_norms.h"
#include "tracelift/complex_ops.h"
#include "tracelift/quadrature.h"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace tracelift;

namespace
{

std::shared_ptr<const SurfaceMesh> cube_surface(int n, double scale = 1.0)
{
  Mesh m = unit_cube_mesh(n);
  if (scale != 1.0)
  {
    auto v = m.vertices();
    for (auto& x : v)
      x *= scale;
    m = Mesh(v, m.cells());
  }
  return std::make_shared<const SurfaceMesh>(std::make_shared<const Mesh>(m));
}

std::shared_ptr<const SurfaceMesh> uniform_surface(int level)
{
  Mesh m = unit_cube_mesh(1);
  for (int l = 0; l < level; ++l)
    m = refine(m, RefineMode::uniform);
  return std::make_shared<const SurfaceMesh>(std::make_shared<const Mesh>(m));
}

void check_spd_like(const Eigen::MatrixXd& A, bool definite)
{
  const double scale = A.cwiseAbs().maxCoeff();
  CHECK((A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * lmax);
  if (definite)
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

// int_T int_T f over T = {0 <= x2 <= x1 <= 1} with a plain collapsed
// Gauss tensor rule in both variables.
double tensor_reference(const std::function<double(const Eigen::Vector2d&,
                                                   const Eigen::Vector2d&)>& f)
{
  std::vector<double> g, w;
  quadrature::gauss_legendre(14, g, w);
  double s = 0;
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = 0; b < g.size(); ++b)
      for (std::size_t c = 0; c < g.size(); ++c)
        for (std::size_t d = 0; d < g.size(); ++d)
        {
          Eigen::Vector2d x(g[a], g[a] * g[b]), y(g[c], g[c] * g[d]);
          s += w[a] * w[b] * w[c] * w[d] * g[a] * g[c] * f(x, y);
        }
  return s;
}

} // namespace

TEST_CASE("sauter-schwab rules integrate smooth functions")
{
  auto f = [](const Eigen::Vector2d& x, const Eigen::Vector2d& y) {
    return std::exp(x[0] - 0.5 * y[1]) * (1.0 + x[1] * y[0]) + x[1] * y[1];
  };
  const double ref = tensor_reference(f);
  for (int shared : {1, 2, 3})
  {
    const auto& r = detail::sauter_schwab(shared, 8);
    double s1 = 0, sf = 0;
    for (std::size_t q = 0; q < r.w.size(); ++q)
    {
      s1 += r.w[q];
      sf += r.w[q] * f(r.x[q], r.y[q]);
      // both points stay in the reference triangle
      CHECK(r.x[q][1] <= r.x[q][0] + 1e-15);
      CHECK(r.y[q][1] <= r.y[q][0] + 1e-15);
    }
    CHECK(s1 == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(sf == doctest::Approx(ref).epsilon(1e-9));
  }
  CHECK_THROWS_AS(detail::sauter_schwab(0, 4), Error);
}

TEST_CASE("local Grams")
{
  // reference tet, DG0 L2 Gram = volume
  {
    auto m = std::make_shared<const Mesh>(
        Mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)},
             {{0, 1, 2, 3}}));
    auto U = FESpace::create(m, Family::DG, 0);
    NormOperator g = gram(U, NormKind::l2);
    REQUIRE(g.dim() == 1);
    // the DG basis is L2-orthonormal; the constant 1 has coefficient sqrt|K|
    CHECK(g.dense()(0, 0) == doctest::Approx(1.0));
    Eigen::VectorXd one = interpolate(*U, scalar_field([](const Vec3&) { return 1.0; }));
    CHECK(g.norm_sq(one) == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
  }
  auto m = std::make_shared<const Mesh>(unit_cube_mesh(2));
  for (int k : {0, 1})
  {
    auto W = FESpace::create(m, Family::Lagrange, k);
    auto N = FESpace::create(m, Family::Nedelec1, k);
    auto V = FESpace::create(m, Family::RaviartThomas, k);
    // constant field: H(div) form = |Omega| |c|^2
    const Vec3 c(1.0, -2.0, 0.5);
    Eigen::VectorXd cv = interpolate(*V, vector_field([&](const Vec3&) { return c; }));
    CHECK(gram(V, NormKind::hdiv).norm_sq(cv) == doctest::Approx(c.squaredNorm()).epsilon(1e-12));
    // x has div 3
    Eigen::VectorXd xv = interpolate(*V, vector_field([](const Vec3& x) { return x; }));
    CHECK(gram(V, NormKind::hdiv).norm_sq(xv) == doctest::Approx(1.0 + 9.0).epsilon(1e-12));
    // (-y, x, 0) has curl (0, 0, 2)
    Eigen::VectorXd rv = interpolate(*N, vector_field([](const Vec3& x) { return Vec3(-x[1], x[0], 0); }));
    CHECK(gram(N, NormKind::hcurl).norm_sq(rv) == doctest::Approx(2.0 / 3.0 + 4.0).epsilon(1e-12));
    // gradients: H(curl) form = L2 form
    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    Eigen::VectorXd u(W->dim());
    for (auto& x : u)
      x = nd(rng);
    const SpMat G = diff_operator(DiffKind::grad, W, N).matrix;
    const Eigen::VectorXd gu = G * u;
    CHECK(gram(N, NormKind::hcurl).norm_sq(gu)
          == doctest::Approx(gram(N, NormKind::l2).norm_sq(gu)).epsilon(1e-10));
    // H1 on Lagrange: constants see only the mass
    Eigen::VectorXd one = Eigen::VectorXd::Ones(W->dim());
    CHECK(gram(W, NormKind::h1).norm_sq(one) == doctest::Approx(1.0).epsilon(1e-12));
    // x + 2y + 3z: |grad|^2 = 14
    Eigen::VectorXd lin = interpolate(*W, scalar_field([](const Vec3& x) { return x[0] + 2 * x[1] + 3 * x[2]; }));
    const double l2 = gram(W, NormKind::l2).norm_sq(lin);
    CHECK(gram(W, NormKind::h1).norm_sq(lin) - l2 == doctest::Approx(14.0).epsilon(1e-12));
    CHECK_THROWS_AS(gram(W, NormKind::hdiv), Error);
    CHECK_THROWS_AS(gram(V, NormKind::hcurl), Error);
    CHECK_THROWS_AS(gram(V, NormKind::hminus_half), Error);
  }
  // surface Grams: area and surface divergence
  auto s = cube_surface(2);
  auto M = FESpace::create(s, Family::SurfaceDG, 0);
  Eigen::VectorXd mone = interpolate(*M, scalar_field([](const Vec3&) { return 1.0; }));
  CHECK(gram(M, NormKind::l2).norm_sq(mone) == doctest::Approx(6.0));
  auto P = FESpace::create(s, Family::SurfaceLagrange, 0);
  CHECK(gram(P, NormKind::h1).norm_sq(Eigen::VectorXd::Ones(P->dim())) == doctest::Approx(6.0));
  for (auto* op : {&M, &P})
    check_spd_like(gram(*op, NormKind::l2).dense(), true);
}

TEST_CASE("slobodetskij gram structure")
{
  auto s = cube_surface(1);
  for (int k : {0, 1})
  {
    auto P = FESpace::create(s, Family::SurfaceLagrange, k);
    auto M = FESpace::create(s, Family::SurfaceDG, k);
    for (const auto& sp : {P, M})
    {
      NormOperator semi = slobodetskij_gram(sp, 0.5, true);
      check_spd_like(semi.dense_matrix, false);
      Eigen::VectorXd one = interpolate(*sp, scalar_field([](const Vec3&) { return 1.0; }));
      const double scale = semi.dense_matrix.cwiseAbs().maxCoeff();
      CHECK((semi.dense_matrix * one).cwiseAbs().maxCoeff() <= 1e-12 * scale);
      CHECK(std::abs(semi.norm_sq(one)) <= 1e-12 * scale * one.squaredNorm());
      NormOperator full = slobodetskij_gram(sp, 0.5);
      check_spd_like(full.dense_matrix, true);
      CHECK(full.norm_sq(one) == doctest::Approx(6.0).epsilon(1e-10));
      CHECK(full.metadata["s"].get<double>() == 0.5);
    }
  }
  auto R = FESpace::create(s, Family::SurfaceRT, 0);
  CHECK_THROWS_AS(slobodetskij_gram(R, 0.5), Error);
  auto P = FESpace::create(s, Family::SurfaceLagrange, 0);
  CHECK_THROWS_AS(slobodetskij_gram(P, 1.5), Error);
  CHECK_THROWS_AS(slobodetskij_gram(P, 0.5, false, 5), Error);
}

TEST_CASE("slobodetskij scaling law")
{
  for (double lambda : {0.5, 3.0})
  {
    auto s1 = cube_surface(1), sl = cube_surface(1, lambda);
    auto P1 = FESpace::create(s1, Family::SurfaceLagrange, 0);
    auto Pl = FESpace::create(sl, Family::SurfaceLagrange, 0);
    const Eigen::MatrixXd M1 = gram(P1, NormKind::l2).dense();
    const Eigen::MatrixXd Ml = gram(Pl, NormKind::l2).dense();
    CHECK((Ml - lambda * lambda * M1).cwiseAbs().maxCoeff()
          <= 1e-12 * Ml.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd A1 = slobodetskij_gram(P1, 0.5, true).dense_matrix;
    const Eigen::MatrixXd Al = slobodetskij_gram(Pl, 0.5, true).dense_matrix;
    CHECK((Al - lambda * A1).cwiseAbs().maxCoeff()
          <= 1e-11 * Al.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("slobodetskij hat function against Monte-Carlo")
{
  auto s = cube_surface(2);
  auto P = FESpace::create(s, Family::SurfaceLagrange, 0);
  const NormOperator A = slobodetskij_gram(P, 0.5, true);
  const auto& V = s->mesh().vertices();

  // hats at a face centre, an edge midpoint and a corner
  for (const Vec3 target : {Vec3(0.5, 0.5, 0.0), Vec3(1.0, 0.5, 0.0), Vec3(1.0, 1.0, 1.0)})
  {
    int vid = -1;
    for (int v : s->vertices())
      if ((V[v] - target).norm() < 1e-12)
        vid = v;
    REQUIRE(vid >= 0);

    // test-side sampler: triangle by area, uniform barycentric point
    std::vector<double> areas;
    std::vector<int> support;
    for (int t = 0; t < s->num_triangles(); ++t)
    {
      areas.push_back(s->area(t));
      for (int v : s->triangle(t))
        if (v == vid)
          support.push_back(t);
    }
    std::vector<double> sareas;
    double sarea = 0;
    for (int t : support)
    {
      sareas.push_back(s->area(t));
      sarea += s->area(t);
    }
    std::mt19937_64 rng(42);
    std::discrete_distribution<int> all(areas.begin(), areas.end());
    std::discrete_distribution<int> sup(sareas.begin(), sareas.end());
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto sample = [&](int t, double& hat) {
      double a = U(rng), b = U(rng);
      if (a + b > 1)
        a = 1 - a, b = 1 - b;
      const double l[3] = {1 - a - b, a, b};
      const auto& tri = s->triangle(t);
      Vec3 x = Vec3::Zero();
      hat = 0;
      for (int i = 0; i < 3; ++i)
      {
        x += l[i] * V[tri[i]];
        if (tri[i] == vid)
          hat = l[i];
      }
      return x;
    };
    auto f = [](double hx, const Vec3& x, double hy, const Vec3& y) {
      const double r = (x - y).norm();
      return (hx - hy) * (hx - hy) / (r * r * r);
    };
    // I = 2 int_S int_G f - int_S int_S f
    const long n = 4000000;
    double m1 = 0, m2 = 0;
    for (long i = 0; i < n; ++i)
    {
      double hx, hy;
      const Vec3 x = sample(support[sup(rng)], hx);
      const Vec3 y = sample(all(rng), hy);
      m1 += f(hx, x, hy, y);
      double hx2, hy2;
      const Vec3 x2 = sample(support[sup(rng)], hx2);
      const Vec3 y2 = sample(support[sup(rng)], hy2);
      m2 += f(hx2, x2, hy2, y2);
    }
    const double mc = 2.0 * sarea * 6.0 * m1 / n - sarea * sarea * m2 / n;
    const int dof = P->lagrange_dof(static_cast<std::uint64_t>(vid));
    REQUIRE(dof >= 0);
    const double val = A.dense_matrix(dof, dof);
    MESSAGE("vertex " << target.transpose() << " gram " << val << " mc " << mc);
    CHECK(std::abs(val - mc) <= 0.02 * mc);
  }
}

TEST_CASE("hminus_half realization")
{
  auto s = cube_surface(1);
  auto M = FESpace::create(s, Family::SurfaceDG, 0);
  NeumannEnergy ne(M, 1);
  NormOperator G = ne.gram();
  check_spd_like(G.dense_matrix, true);
  CHECK(G.norm_sq(Eigen::VectorXd::Zero(M->dim())) == 0.0);
  CHECK(G.metadata["resolution"].get<int>() == 1);
  CHECK(G.metadata["mean_weight"].get<double>() == doctest::Approx(1.0 / 6.0));

  // constants: dual norm against the full H^{1/2} norm is sqrt|G|
  Eigen::VectorXd one = interpolate(*M, scalar_field([](const Vec3&) { return 1.0; }));
  CHECK(G.norm_sq(one) == doctest::Approx(6.0).epsilon(1e-12));
  auto Pf = FESpace::create(s, Family::SurfaceLagrange, 1);
  NormOperator slob = slobodetskij_gram(Pf, 0.5);
  const SpMat B = surface_pairing(*Pf, *M);
  CHECK(dual_norm(one, slob, B) == doctest::Approx(std::sqrt(6.0)).epsilon(1e-8));

  // field evaluation agrees with the Gram on discrete data
  std::mt19937 rng(9);
  std::normal_distribution<double> nd;
  Eigen::VectorXd g(M->dim());
  for (auto& x : g)
    x = nd(rng);
  FEFunction gf(M, g);
  Field field = [&](const Vec3& x, int t) {
    const Eigen::MatrixXd B = M->eval(t, {x});
    return Eigen::VectorXd::Constant(1, B(0, 0) * g[M->entity_dofs(t)[0]]);
  };
  CHECK(ne.norm_sq(field) == doctest::Approx(G.norm_sq(g)).epsilon(1e-10));

  // mean-zero space
  auto M0 = FESpace::create(s, Family::SurfaceDG, 0, true);
  NormOperator G0 = hminus_half_gram(M0, 1);
  Eigen::VectorXd g0 = g - (M->integrals().dot(g) / 6.0) * one;
  CHECK(G0.norm_sq(g0) == doctest::Approx(G.norm_sq(g0)).epsilon(1e-10));
  CHECK_THROWS_AS(NeumannEnergy(FESpace::create(s, Family::SurfaceRT, 0), 1), Error);
}

TEST_CASE("hminus_half self-convergence")
{
  auto s = cube_surface(1);
  for (int k : {0, 1})
  {
    auto M = FESpace::create(s, Family::SurfaceDG, k);
    std::mt19937 rng(1 + k);
    std::normal_distribution<double> nd;
    Eigen::VectorXd g(M->dim());
    for (auto& x : g)
      x = nd(rng);
    std::vector<double> v;
    for (int r : {1, 2, 3})
      v.push_back(hminus_half_gram(M, r).norm_sq(g));
    for (int i = 0; i < 2; ++i)
    {
      INFO("k=" << k << " r=" << i + 1 << " " << v[i] << " -> " << v[i + 1]);
      CHECK(std::abs(v[i + 1] - v[i]) < 0.05 * v[i]);
    }
  }
}

TEST_CASE("dual versus extension equivalence")
{
  double lo = 1e300, hi = 0;
  for (int level : {0, 1, 2})
  {
    auto s = uniform_surface(level);
    auto M = FESpace::create(s, Family::SurfaceDG, 0);
    NormOperator G = hminus_half_gram(M, 1);
    AuxiliaryRefinement aux(s, 1);
    auto Pf = FESpace::create(aux.fine_surface, Family::SurfaceLagrange, 1);
    NormOperator A = slobodetskij_gram(Pf, 0.5);
    // fine surface functions paired with coarse data
    auto Wf = FESpace::create(aux.fine, Family::Lagrange, 1);
    const SpMat Bv = surface_pairing(*Wf, *M, &aux);
    const SpMat Tr = trace_operator(TraceKind::scalar, Wf, Pf).matrix;
    // Tr selects surface nodes; pairing for surface functions: Tr B
    const SpMat B = Tr * Bv;
    std::mt19937 rng(17);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 4; ++trial)
    {
      Eigen::VectorXd g(M->dim());
      for (auto& x : g)
        x = nd(rng);
      if (trial == 0)
        g -= (M->integrals().dot(g) / 6.0)
             * interpolate(*M, scalar_field([](const Vec3&) { return 1.0; }));
      const double ratio = dual_norm(g, A, B) / std::sqrt(G.norm_sq(g));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  MESSAGE("dual/extension ratio in [" << lo << ", " << hi << "]");
  CHECK(hi <= 5.0);
  CHECK(lo >= 1.0 / 5.0);
}

TEST_CASE("tangential dual surrogate")
{
  auto s = cube_surface(1);
  for (int k : {0, 1})
  {
    auto R = FESpace::create(s, Family::SurfaceRT, k);
    auto P = FESpace::create(s, Family::SurfaceLagrange, k);
    auto Md = FESpace::create(s, Family::SurfaceDG, k);
    TangentialDual td(R, 1);
    NormOperator G = td.gram();
    check_spd_like(G.dense_matrix, true);
    CHECK(G.norm_sq(Eigen::VectorXd::Zero(R->dim())) == 0.0);

    std::mt19937 rng(4 + k);
    std::normal_distribution<double> nd;
    Eigen::VectorXd phi(P->dim());
    for (auto& x : phi)
      x = nd(rng);
    // r = curl_G phi: divergence term vanishes
    const SpMat SC = diff_operator(DiffKind::surf_curl, P, R).matrix;
    const SpMat SD = diff_operator(DiffKind::surf_div, R, Md).matrix;
    const Eigen::VectorXd r = SC * phi;
    CHECK((SD * r).norm() <= 1e-10 * r.norm());
    NormOperator Gd = hminus_half_gram(Md, 1);
    CHECK(Gd.norm_sq(SD * r) <= 1e-18 * G.norm_sq(r));

    // field evaluation agrees with the Gram on discrete data
    Eigen::VectorXd rr(R->dim());
    for (auto& x : rr)
      x = nd(rng);
    const Eigen::VectorXd dr = SD * rr;
    Field rf = [&](const Vec3& x, int t) {
      const Eigen::MatrixXd B = R->eval(t, {x});
      Eigen::VectorXd c(B.cols());
      for (int i = 0; i < B.cols(); ++i)
        c[i] = rr[R->entity_dofs(t)[i]];
      return Eigen::VectorXd(B * c);
    };
    Field df = [&](const Vec3& x, int t) {
      const Eigen::MatrixXd B = Md->eval(t, {x});
      Eigen::VectorXd c(B.cols());
      for (int i = 0; i < B.cols(); ++i)
        c[i] = dr[Md->entity_dofs(t)[i]];
      return Eigen::VectorXd(B * c);
    };
    CHECK(td.norm_sq(rf, df) == doctest::Approx(G.norm_sq(rr)).epsilon(1e-9));

    // self-convergence r -> r + 1
    const double v1 = G.norm_sq(rr);
    const double v2 = hminus_half_par_div_gram(R, 2).norm_sq(rr);
    INFO("k=" << k << " " << v1 << " -> " << v2);
    CHECK(std::abs(v2 - v1) < 0.10 * v1);
  }
}
