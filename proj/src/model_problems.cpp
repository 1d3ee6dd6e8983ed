#include "tracelift/model_problems.h"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace tracelift
{

namespace
{

constexpr double pi = std::numbers::pi;

int default_degree(const FESpace& s, int quad_degree)
{
  return quad_degree >= 0 ? quad_degree : 2 * s.poly_degree() + 4;
}

// D u at the points of entity e, point-major.
Eigen::VectorXd values_on(const FESpace& s, const Eigen::VectorXd& c, int e,
                          const std::vector<Vec3>& x, Deriv d)
{
  const Eigen::MatrixXd B = s.eval(e, x, d);
  const auto& dofs = s.entity_dofs(e);
  Eigen::VectorXd loc(dofs.size());
  for (std::size_t i = 0; i < dofs.size(); ++i)
    loc[i] = c[dofs[i]];
  return B * loc;
}

// FE function on a boundary space as a Field on triangles.
Field surface_field(SpacePtr s, Eigen::VectorXd c, Deriv d = Deriv::Value)
{
  return [s, c = std::move(c), d](const Vec3& x, int t) {
    return values_on(*s, c, t, {x}, d);
  };
}

double relative(const Eigen::VectorXd& r, double scale)
{
  return scale > 0.0 ? r.norm() / scale : r.norm();
}

} // namespace

Eigen::VectorXd load_vector(const FESpace& space, const Field& f, Deriv d,
                            int quad_degree)
{
  const int deg = default_degree(space, quad_degree);
  const int m = space.deriv_size(d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.dim());
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int e = 0; e < space.num_entities(); ++e)
  {
    entity_quadrature(space, e, deg, x, w);
    const Eigen::MatrixXd B = space.eval(e, x, d);
    const auto& dofs = space.entity_dofs(e);
    for (std::size_t q = 0; q < x.size(); ++q)
    {
      const Eigen::VectorXd fq = f(x[q], e);
      if (fq.size() != m)
        throw Error("load_vector: field has the wrong number of components");
      const Eigen::VectorXd l = B.middleRows(m * q, m).transpose() * fq;
      for (std::size_t i = 0; i < dofs.size(); ++i)
        b[dofs[i]] += w[q] * l[i];
    }
  }
  return b;
}

double error_norm(const FEFunction& u, const Field& exact, Deriv d,
                  int quad_degree)
{
  const FESpace& s = u.space();
  const int deg = default_degree(s, quad_degree);
  const int m = s.deriv_size(d);
  double sum = 0.0;
  std::vector<Vec3> x;
  std::vector<double> w;
  for (int e = 0; e < s.num_entities(); ++e)
  {
    entity_quadrature(s, e, deg, x, w);
    const Eigen::VectorXd uh = values_on(s, u.coeffs(), e, x, d);
    for (std::size_t q = 0; q < x.size(); ++q)
      sum += w[q] * (uh.segment(m * q, m) - exact(x[q], e)).squaredNorm();
  }
  return std::sqrt(sum);
}

Eigen::VectorXd gram_projection(SpacePtr space, NormKind kind,
                                const Field& value, const Field& deriv)
{
  Deriv d = Deriv::Value;
  switch (kind)
  {
  case NormKind::l2:
    break;
  case NormKind::hdiv:
    d = Deriv::Div;
    break;
  case NormKind::hcurl:
    d = Deriv::Curl;
    break;
  case NormKind::h1:
    d = Deriv::Grad;
    break;
  default:
    throw Error("gram_projection: unsupported norm " + to_string(kind));
  }
  Eigen::VectorXd b = load_vector(*space, value);
  if (d != Deriv::Value)
  {
    if (!deriv)
      throw Error("gram_projection: derivative field required");
    b += load_vector(*space, deriv, d);
  }
  linalg::SpdSolver solver(gram(space, kind).sparse_matrix);
  return solver.solve(b);
}

BVPSolution solve_mixed_neumann(std::shared_ptr<const Mesh> mesh, int k,
                                const Field& f, const FEFunction& g)
{
  if (g.space().family() != Family::SurfaceDG)
    throw Error("solve_mixed_neumann: g must be a SurfaceDG function");
  if (g.space().surface().mesh_ptr() != mesh or g.space().degree() != k)
    throw Error("solve_mixed_neumann: g lives on another mesh or degree");
  auto s = ComplexSpaces::create(mesh, k);
  MixedNeumannSolver solver(s);
  // orthonormal DG basis: projection coefficients are the moments
  const Eigen::VectorXd fU = interpolate(*s->U, f);
  Eigen::VectorXd u;
  const Eigen::VectorXd sigma = solver.solve(g.coeffs(), fU, &u);

  const SpMat Mv = mass_matrix(*s->V);
  const SpMat& D = solver.div();
  const SpMat& T = solver.normal_trace();
  const std::vector<int> bmap = selection_map(T);
  // (sigma, eta) + (u, div eta) on interior eta; (div sigma + f, w)
  Eigen::VectorXd r1 = Mv * sigma + D.transpose() * u;
  const Eigen::VectorXd s1 = (SpMat(Mv.cwiseAbs()) * sigma.cwiseAbs())
                             + SpMat(D.transpose()).cwiseAbs() * u.cwiseAbs();
  for (int i = 0; i < s->V->dim(); ++i)
    if (bmap[i] >= 0)
      r1[i] = 0.0;
  const Eigen::VectorXd r2 = D * sigma + fU;
  const double scale = s1.norm() + fU.norm() + (D.cwiseAbs() * sigma.cwiseAbs()).norm();

  BVPSolution out{"mixed_neumann",
                  "int sigma.eta + u div eta - w div sigma",
                  FEFunction(s->U, u),
                  FEFunction(s->V, sigma),
                  g.coeffs()};
  Eigen::VectorXd r(r1.size() + r2.size());
  r << r1, r2;
  out.galerkin_residual = relative(r, scale);
  out.trace_residual = (T * sigma - g.coeffs()).cwiseAbs().maxCoeff();
  return out;
}

BVPSolution solve_curlcurl(std::shared_ptr<const Mesh> mesh, int k,
                           const Field& f, const FEFunction& r)
{
  if (r.space().family() != Family::SurfaceRT)
    throw Error("solve_curlcurl: r must be a SurfaceRT function");
  if (r.space().surface().mesh_ptr() != mesh or r.space().degree() != k)
    throw Error("solve_curlcurl: r lives on another mesh or degree");
  SpacePtr N = FESpace::create(mesh, Family::Nedelec1, k);
  const SpMat Gt = trace_operator(TraceKind::tangential, N, r.space_ptr()).matrix;
  const std::vector<int> bmap = selection_map(Gt);
  const SpMat A = gram(N, NormKind::hcurl).sparse_matrix;
  const Eigen::VectorXd F = load_vector(*N, f);

  const int n = N->dim();
  std::vector<char> im(n, 0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
  {
    if (bmap[i] >= 0)
      u[i] = r.coeffs()[bmap[i]];
    else
      im[i] = 1;
  }
  const std::vector<int> interior = linalg::indices(im);
  if (!interior.empty())
  {
    const std::vector<char> all(n, 1);
    const SpMat AII = linalg::select(A, im, im);
    const SpMat AIB = linalg::select(A, im, all);
    Eigen::VectorXd rhs = -(AIB * u);
    for (std::size_t i = 0; i < interior.size(); ++i)
      rhs[i] += F[interior[i]];
    const Eigen::VectorXd ui = linalg::SpdSolver(AII).solve(rhs);
    for (std::size_t i = 0; i < interior.size(); ++i)
      u[interior[i]] = ui[i];
  }
  Eigen::VectorXd res = A * u - F;
  const Eigen::VectorXd sc = SpMat(A.cwiseAbs()) * u.cwiseAbs();
  for (int i = 0; i < n; ++i)
    if (bmap[i] >= 0)
      res[i] = 0.0;

  BVPSolution out{"curlcurl", "int curl u . curl v + u . v", FEFunction(N, u),
                  std::nullopt, r.coeffs()};
  out.galerkin_residual = relative(res, sc.norm() + F.norm());
  out.trace_residual = (Gt * u - r.coeffs()).cwiseAbs().maxCoeff();
  return out;
}

std::string to_string(ProblemKind p)
{
  return p == ProblemKind::mixed ? "mixed" : "curlcurl";
}

ExactSolution manufactured(ProblemKind p)
{
  ExactSolution e;
  e.problem = p;
  auto v1 = [](double x) { return Eigen::VectorXd::Constant(1, x); };
  if (p == ProblemKind::mixed)
  {
    e.u = [v1](const Vec3& x, int) {
      return v1(std::sin(pi * x[0]) * std::cos(pi * x[1]));
    };
    e.flux = [](const Vec3& x, int) {
      return Eigen::VectorXd(Vec3(pi * std::cos(pi * x[0]) * std::cos(pi * x[1]),
                                  -pi * std::sin(pi * x[0]) * std::sin(pi * x[1]),
                                  0.0));
    };
    e.flux_div = [v1](const Vec3& x, int) {
      return v1(-2 * pi * pi * std::sin(pi * x[0]) * std::cos(pi * x[1]));
    };
    e.f = [v1](const Vec3& x, int) {
      return v1(2 * pi * pi * std::sin(pi * x[0]) * std::cos(pi * x[1]));
    };
  }
  else
  {
    auto u = [](const Vec3& x) {
      return Vec3(std::sin(pi * x[1]), std::sin(pi * x[2]), std::sin(pi * x[0]));
    };
    e.u = [u](const Vec3& x, int) { return Eigen::VectorXd(u(x)); };
    e.flux = [](const Vec3& x, int) {
      return Eigen::VectorXd(
          Vec3(-pi * std::cos(pi * x[2]), -pi * std::cos(pi * x[0]),
               -pi * std::cos(pi * x[1])));
    };
    e.f = [u](const Vec3& x, int) {
      return Eigen::VectorXd((pi * pi + 1.0) * u(x));
    };
  }
  return e;
}

namespace
{

Eigen::VectorXd normal_noise(int n, std::mt19937& rng)
{
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i)
    v[i] = N(rng);
  return v;
}

} // namespace

ErrorStudyTable decoupled_error_study(
    ProblemKind problem, const std::vector<std::shared_ptr<const Mesh>>& meshes,
    int k, const std::vector<double>& eps, unsigned seed, int r,
    const std::optional<ExactSolution>& exact)
{
  const ExactSolution ex = exact ? *exact : manufactured(problem);
  if (ex.problem != problem)
    throw Error("decoupled_error_study: exact solution is for another problem");
  ErrorStudyTable table;
  table.problem = problem;
  table.k = k;
  table.resolution = r;
  std::mt19937 rng(seed);
  for (std::size_t l = 0; l < meshes.size(); ++l)
  {
    auto s = ComplexSpaces::create(meshes[l], k);
    const SurfaceMesh& surf = *s->surface;
    if (problem == ProblemKind::mixed)
    {
      // g = sigma.n and its projection
      const Field g = [&](const Vec3& x, int t) {
        return Eigen::VectorXd::Constant(1, ex.flux(x, surf.owner_cell(t)).dot(surf.normal(t)));
      };
      Eigen::VectorXd Pg = interpolate(*s->M, g);
      const Eigen::VectorXd& a = s->M->integrals();
      // the projections of f and g are compatible only up to quadrature
      // error; shift g_h by a constant to restore int f_h + int g_h = 0
      const Eigen::VectorXd one = interpolate(*s->M, scalar_field([](const Vec3&) { return 1.0; }));
      const double fint = s->U->integrals().dot(interpolate(*s->U, ex.f));
      Pg -= ((a.dot(Pg) + fint) / a.dot(one)) * one;
      Eigen::VectorXd noise = normal_noise(s->M->dim(), rng);
      noise -= (a.dot(noise) / a.squaredNorm()) * a;
      noise /= std::sqrt(noise.dot(mass_matrix(*s->M) * noise));

      const Eigen::VectorXd sb = gram_projection(s->V, NormKind::hdiv, ex.flux, ex.flux_div);
      const Eigen::VectorXd ub = interpolate(*s->U, ex.u);
      const double best = std::sqrt(std::pow(error_norm(FEFunction(s->V, sb), ex.flux), 2)
                                    + std::pow(error_norm(FEFunction(s->V, sb), ex.flux_div, Deriv::Div), 2))
                          + error_norm(FEFunction(s->U, ub), ex.u);
      NeumannEnergy hm(s->M, r);
      for (double e : eps)
      {
        const Eigen::VectorXd gh = Pg + e * noise;
        BVPSolution sol = solve_mixed_neumann(meshes[l], k, ex.f, FEFunction(s->M, gh));
        const FEFunction& sig = *sol.flux;
        const double fl2 = error_norm(sig, ex.flux);
        const double fdiv = error_norm(sig, ex.flux_div, Deriv::Div);
        ErrorStudyRow row;
        row.level = static_cast<int>(l);
        row.h_max = meshes[l]->h_max();
        row.ndof = s->V->dim() + s->U->dim();
        row.eps = e;
        row.l2_error = fl2;
        row.total_error = std::sqrt(fl2 * fl2 + fdiv * fdiv) + error_norm(sol.primal, ex.u);
        row.best_approx = best;
        const Field ghf = surface_field(s->M, gh);
        row.datum_error = std::sqrt(std::max(
            hm.norm_sq([&](const Vec3& x, int t) { return Eigen::VectorXd(g(x, t) - ghf(x, t)); }),
            0.0));
        const Field nf = surface_field(s->M, Eigen::VectorXd(e * noise));
        row.noise_norm = std::sqrt(std::max(hm.norm_sq(nf), 0.0));
        row.effectivity = row.total_error / (row.best_approx + row.datum_error);
        table.rows.push_back(row);
      }
    }
    else
    {
      // r = u x n, div_G r = curl u . n
      const Field rt = [&](const Vec3& x, int t) {
        return Eigen::VectorXd(Vec3(ex.u(x, surf.owner_cell(t))).cross(surf.normal(t)));
      };
      const Field rdiv = [&](const Vec3& x, int t) {
        return Eigen::VectorXd::Constant(1, ex.flux(x, surf.owner_cell(t)).dot(surf.normal(t)));
      };
      const SpMat Gt = trace_operator(TraceKind::tangential, s->N, s->R).matrix;
      const Eigen::VectorXd Pr = Gt * interpolate(*s->N, ex.u);
      Eigen::VectorXd noise = normal_noise(s->R->dim(), rng);
      noise /= std::sqrt(noise.dot(mass_matrix(*s->R) * noise));

      const Eigen::VectorXd ubest = gram_projection(s->N, NormKind::hcurl, ex.u, ex.flux);
      const FEFunction ub(s->N, ubest);
      const double best = std::sqrt(std::pow(error_norm(ub, ex.u), 2)
                                    + std::pow(error_norm(ub, ex.flux, Deriv::Curl), 2));
      TangentialDual td(s->R, r);
      for (double e : eps)
      {
        const Eigen::VectorXd rh = Pr + e * noise;
        BVPSolution sol = solve_curlcurl(meshes[l], k, ex.f, FEFunction(s->R, rh));
        const double ul2 = error_norm(sol.primal, ex.u);
        const double ucurl = error_norm(sol.primal, ex.flux, Deriv::Curl);
        ErrorStudyRow row;
        row.level = static_cast<int>(l);
        row.h_max = meshes[l]->h_max();
        row.ndof = s->N->dim();
        row.eps = e;
        row.l2_error = ul2;
        row.total_error = std::sqrt(ul2 * ul2 + ucurl * ucurl);
        row.best_approx = best;
        const Field rhf = surface_field(s->R, rh);
        const Field rhdiv = surface_field(s->R, rh, Deriv::SurfDiv);
        row.datum_error = std::sqrt(std::max(
            td.norm_sq([&](const Vec3& x, int t) { return Eigen::VectorXd(rt(x, t) - rhf(x, t)); },
                       [&](const Vec3& x, int t) { return Eigen::VectorXd(rdiv(x, t) - rhdiv(x, t)); }),
            0.0));
        const Eigen::VectorXd en = e * noise;
        row.noise_norm = std::sqrt(std::max(
            td.norm_sq(surface_field(s->R, en), surface_field(s->R, en, Deriv::SurfDiv)), 0.0));
        row.effectivity = row.total_error / (row.best_approx + row.datum_error);
        table.rows.push_back(row);
      }
    }
  }
  return table;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y)
{
  const std::size_t n = x.size();
  if (n < 2 or y.size() != n)
    return 0.0;
  double xm = 0, ym = 0;
  for (std::size_t i = 0; i < n; ++i)
    xm += x[i] / n, ym += y[i] / n;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i)
  {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) * (x[i] - xm);
  }
  return den > 0 ? num / den : 0.0;
}

std::vector<ErrorStudyRow> ErrorStudyTable::at_eps(double eps) const
{
  std::vector<ErrorStudyRow> out;
  for (const auto& r : rows)
    if (r.eps == eps)
      out.push_back(r);
  return out;
}

double ErrorStudyTable::effectivity_drift(double eps) const
{
  double lo = 1e300, hi = 0.0;
  for (const auto& r : at_eps(eps))
  {
    lo = std::min(lo, r.effectivity);
    hi = std::max(hi, r.effectivity);
  }
  return hi > 0.0 ? hi / lo : 0.0;
}

double ErrorStudyTable::noise_slope(int level, double eps_min) const
{
  std::vector<double> x, y;
  for (const auto& r : rows)
    if (r.level == level and r.eps >= eps_min and r.eps > 0.0)
    {
      x.push_back(std::log(r.eps));
      y.push_back(std::log(r.total_error));
    }
  return ls_slope(x, y);
}

double ErrorStudyTable::convergence_order(const std::string& column,
                                          int min_level) const
{
  std::vector<double> x, y;
  for (const auto& r : at_eps(0.0))
  {
    if (r.level < min_level)
      continue;
    double v = 0.0;
    if (column == "total_error")
      v = r.total_error;
    else if (column == "l2_error")
      v = r.l2_error;
    else if (column == "best_approx")
      v = r.best_approx;
    else
      throw Error("convergence_order: unknown column " + column);
    x.push_back(std::log(r.h_max));
    y.push_back(std::log(v));
  }
  return ls_slope(x, y);
}

nlohmann::json ErrorStudyTable::to_json() const
{
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"level", r.level},
                  {"h_max", r.h_max},
                  {"ndof", r.ndof},
                  {"eps", r.eps},
                  {"total_error", r.total_error},
                  {"l2_error", r.l2_error},
                  {"best_approx", r.best_approx},
                  {"datum_error", r.datum_error},
                  {"noise_norm", r.noise_norm},
                  {"effectivity", r.effectivity}});
  return {{"problem", to_string(problem)},
          {"k", k},
          {"resolution", resolution},
          {"rows", rs}};
}

std::string ErrorStudyTable::csv() const
{
  std::ostringstream os;
  os << "level,h_max,ndof,eps,total_error,l2_error,best_approx,datum_error,"
        "noise_norm,effectivity\n";
  char buf[512];
  for (const auto& r : rows)
  {
    std::snprintf(buf, sizeof buf,
                  "%d,%.10e,%d,%.6e,%.10e,%.10e,%.10e,%.10e,%.10e,%.10e\n",
                  r.level, r.h_max, r.ndof, r.eps, r.total_error, r.l2_error,
                  r.best_approx, r.datum_error, r.noise_norm, r.effectivity);
    os << buf;
  }
  return os.str();
}

} // namespace tracelift
