#include "tracelift/extension_ops.h"

#include "tracelift/quadrature.h"

#include <Eigen/QR>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tracelift
{

std::shared_ptr<const ComplexSpaces>
ComplexSpaces::create(std::shared_ptr<const Mesh> mesh, int k)
{
  auto s = std::make_shared<ComplexSpaces>();
  s->mesh = mesh;
  s->surface = std::make_shared<const SurfaceMesh>(mesh);
  s->k = k;
  s->W = FESpace::create(mesh, Family::Lagrange, k);
  s->N = FESpace::create(mesh, Family::Nedelec1, k);
  s->V = FESpace::create(mesh, Family::RaviartThomas, k);
  s->U = FESpace::create(mesh, Family::DG, k);
  s->P = FESpace::create(s->surface, Family::SurfaceLagrange, k);
  s->R = FESpace::create(s->surface, Family::SurfaceRT, k);
  s->M = FESpace::create(s->surface, Family::SurfaceDG, k);
  return s;
}

std::vector<int> selection_map(const SpMat& T)
{
  std::vector<int> map(T.cols(), -1);
  std::vector<int> hits(T.rows(), 0);
  for (int j = 0; j < T.outerSize(); ++j)
    for (SpMat::InnerIterator it(T, j); it; ++it)
    {
      if (std::abs(it.value() - 1.0) > 1e-10 or map[j] >= 0)
        throw Error("trace matrix is not a selection");
      map[j] = static_cast<int>(it.row());
      ++hits[it.row()];
    }
  for (int h : hits)
    if (h != 1)
      throw Error("trace matrix is not a selection");
  return map;
}

namespace
{

// |A x - b| relative to |(|A| |x|)| + |b|: zero for exact identities up to
// the roundoff of forming A x.
double relative_residual(const SpMat& A, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b)
{
  const Eigen::VectorXd r = A * x - b;
  const double scale = (A.cwiseAbs() * x.cwiseAbs()).norm() + b.norm();
  return scale > 0.0 ? r.norm() / scale : r.norm();
}

SpMat sparse_column(const Eigen::VectorXd& v)
{
  SpMat c(v.size(), 1);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < v.size(); ++i)
    if (v[i] != 0.0)
      t.emplace_back(i, 0, v[i]);
  c.setFromTriplets(t.begin(), t.end());
  return c;
}

std::vector<char> mask_of(const std::vector<int>& idx, int n)
{
  std::vector<char> m(n, 0);
  for (int i : idx)
    m[i] = 1;
  return m;
}

std::vector<char> all_of(int n) { return std::vector<char>(n, 1); }

} // namespace

MixedNeumannSolver::MixedNeumannSolver(std::shared_ptr<const ComplexSpaces> s)
    : _s(std::move(s))
{
  _D = diff_operator(DiffKind::div, _s->V, _s->U).matrix;
  _T = trace_operator(TraceKind::normal, _s->V, _s->M).matrix;
  _Mv = mass_matrix(*_s->V);
  _bmap = selection_map(_T);
  for (int i = 0; i < _s->V->dim(); ++i)
    if (_bmap[i] < 0)
      _interior.push_back(i);
  const int nV = _s->V->dim(), nU = _s->U->dim();
  const int nI = static_cast<int>(_interior.size());
  const auto im = mask_of(_interior, nV);
  const SpMat MII = linalg::select(_Mv, im, im);
  const SpMat DI = linalg::select(_D, all_of(nU), im);
  _MIB = linalg::select(_Mv, im, all_of(nV));
  _DB = _D;
  const SpMat e = sparse_column(_s->U->integrals());
  const SpMat A = linalg::assemble_blocks(
      nI + nU + 1, nI + nU + 1,
      {{0, 0, MII},
       {0, nI, SpMat(DI.transpose())},
       {nI, 0, DI},
       {nI, nI + nU, e},
       {nI + nU, nI, SpMat(e.transpose())}});
  _lu = std::make_unique<linalg::LuSolver>(A);
}

Eigen::VectorXd MixedNeumannSolver::solve(const Eigen::VectorXd& g,
                                          const Eigen::VectorXd& f,
                                          Eigen::VectorXd* u) const
{
  const FESpace& M = *_s->M;
  const FESpace& U = *_s->U;
  if (g.size() != M.dim() or f.size() != U.dim())
    throw Error("mixed solve: data has the wrong length");
  const double flux = M.integrals().dot(g), source = U.integrals().dot(f);
  const double scale = M.integrals().cwiseAbs().dot(g.cwiseAbs())
                       + U.integrals().cwiseAbs().dot(f.cwiseAbs());
  if (std::abs(flux + source) > 1e-9 * scale)
    throw Error("incompatible Neumann data: int f + int g != 0");

  const int nV = _s->V->dim(), nU = U.dim();
  const int nI = static_cast<int>(_interior.size());
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(nV);
  for (int i = 0; i < nV; ++i)
    if (_bmap[i] >= 0)
      sigma[i] = g[_bmap[i]];
  Eigen::VectorXd rhs(nI + nU + 1);
  rhs.head(nI) = -(_MIB * sigma);
  rhs.segment(nI, nU) = -f - _DB * sigma;
  rhs[nI + nU] = 0.0;
  const Eigen::VectorXd x = _lu->solve(rhs);
  for (int i = 0; i < nI; ++i)
    sigma[_interior[i]] = x[i];
  if (u)
    *u = x.segment(nI, nU);
  return sigma;
}

RtExtension::RtExtension(std::shared_ptr<const ComplexSpaces> s)
    : _solver(std::move(s))
{
}

Eigen::VectorXd RtExtension::extend_meanzero(const Eigen::VectorXd& g) const
{
  const Eigen::VectorXd& a = _solver.spaces().M->integrals();
  if (g.size() != a.size())
    throw Error("extend_rt_meanzero: data has the wrong length");
  if (std::abs(a.dot(g)) > 1e-10 * a.cwiseAbs().dot(g.cwiseAbs()))
    throw Error("extend_rt_meanzero: data has nonzero mean");
  return _solver.solve(g, Eigen::VectorXd::Zero(_solver.spaces().U->dim()));
}

Eigen::VectorXd RtExtension::extend(const Eigen::VectorXd& g) const
{
  const ComplexSpaces& s = _solver.spaces();
  // -div sigma = f with the constant f = -(int g) / |Omega|
  const double F = -s.M->integrals().dot(g) / s.mesh->volume();
  return _solver.solve(g, F * s.U->integrals());
}

CurlRightInverse::CurlRightInverse(std::shared_ptr<const ComplexSpaces> s)
    : _s(std::move(s))
{
  _C = diff_operator(DiffKind::curl, _s->N, _s->V).matrix;
  _G = diff_operator(DiffKind::grad, _s->W, _s->N).matrix;
  _D = diff_operator(DiffKind::div, _s->V, _s->U).matrix;
  const SpMat Mv = mass_matrix(*_s->V);
  const SpMat Mn = mass_matrix(*_s->N);
  const int nN = _s->N->dim(), nW = _s->W->dim();
  const SpMat K = _C.transpose() * Mv * _C;
  const SpMat B = (Mn * _G).rightCols(nW - 1);
  const SpMat A = linalg::assemble_blocks(
      nN + nW - 1, nN + nW - 1,
      {{0, 0, K}, {0, nN, B}, {nN, 0, SpMat(B.transpose())}});
  _lu = std::make_unique<linalg::LuSolver>(A);
  _rhs = _C.transpose() * Mv;
}

Eigen::VectorXd CurlRightInverse::apply(const Eigen::VectorXd& v) const
{
  const int nN = _s->N->dim(), nW = _s->W->dim();
  if (v.size() != _s->V->dim())
    throw Error("curl_right_inverse: field has the wrong length");
  if (v.norm() == 0.0)
    return Eigen::VectorXd::Zero(nN);
  if (relative_residual(_D, v, Eigen::VectorXd::Zero(_D.rows())) > 1e-9)
    throw Error("curl_right_inverse: field is not divergence-free");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nN + nW - 1);
  rhs.head(nN) = _rhs * v;
  const Eigen::VectorXd w = _lu->solve(rhs).head(nN);
  if (relative_residual(_C, w, v) > 1e-8)
    throw Error("curl_right_inverse: field is not in the range of curl");
  return w;
}

SurfacePotential::SurfacePotential(std::shared_ptr<const ComplexSpaces> s)
    : _s(std::move(s))
{
  _SC = diff_operator(DiffKind::surf_curl, _s->P, _s->R).matrix;
  _SD = diff_operator(DiffKind::surf_div, _s->R, _s->M).matrix;
  _MR = mass_matrix(*_s->R);
  const int nP = _s->P->dim();
  const SpMat K = _SC.transpose() * _MR * _SC;
  const SpMat a = sparse_column(_s->P->integrals());
  const SpMat A = linalg::assemble_blocks(
      nP + 1, nP + 1, {{0, 0, K}, {0, nP, a}, {nP, 0, SpMat(a.transpose())}});
  _lu = std::make_unique<linalg::LuSolver>(A);
  _rhs = _SC.transpose() * _MR;
}

Eigen::VectorXd SurfacePotential::apply(const Eigen::VectorXd& m,
                                        double* residual) const
{
  const int nP = _s->P->dim();
  if (m.size() != _s->R->dim())
    throw Error("surface_scalar_potential: field has the wrong length");
  if (residual)
    *residual = 0.0;
  if (m.norm() == 0.0)
    return Eigen::VectorXd::Zero(nP);
  if (relative_residual(_SD, m, Eigen::VectorXd::Zero(_SD.rows())) > 1e-9)
    throw Error("surface_scalar_potential: nonzero surface divergence");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nP + 1);
  rhs.head(nP) = _rhs * m;
  const Eigen::VectorXd phi = _lu->solve(rhs).head(nP);
  const Eigen::VectorXd d = _SC * phi - m;
  const double res = std::sqrt(d.dot(_MR * d) / m.dot(_MR * m));
  if (residual)
    *residual = res;
  if (res > 1e-9)
    throw Error("surface_scalar_potential: residual " + std::to_string(res)
                + " above tolerance");
  return phi;
}

HarmonicLift::HarmonicLift(std::shared_ptr<const ComplexSpaces> s)
    : _s(std::move(s))
{
  _bmap = selection_map(trace_operator(TraceKind::scalar, _s->W, _s->P).matrix);
  const int nW = _s->W->dim();
  for (int i = 0; i < nW; ++i)
    if (_bmap[i] < 0)
      _interior.push_back(i);
  const SpMat K = derivative_matrix(*_s->W, Deriv::Grad);
  const auto im = mask_of(_interior, nW);
  _KIB = linalg::select(K, im, all_of(nW));
  if (!_interior.empty())
    _solver = std::make_unique<linalg::SpdSolver>(linalg::select(K, im, im));
}

Eigen::VectorXd HarmonicLift::apply(const Eigen::VectorXd& phi) const
{
  if (phi.size() != _s->P->dim())
    throw Error("discrete_h1_lift: data has the wrong length");
  const int nW = _s->W->dim();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nW);
  for (int i = 0; i < nW; ++i)
    if (_bmap[i] >= 0)
      u[i] = phi[_bmap[i]];
  if (_solver)
  {
    const Eigen::VectorXd ui = _solver->solve(Eigen::VectorXd(-(_KIB * u)));
    for (std::size_t i = 0; i < _interior.size(); ++i)
      u[_interior[i]] = ui[i];
  }
  return u;
}

NedelecExtension::NedelecExtension(std::shared_ptr<const ComplexSpaces> s)
    : _s(s), _rt(s), _curl(s), _pot(s), _lift(s)
{
  _Gt = trace_operator(TraceKind::tangential, _s->N, _s->R).matrix;
  _SD = diff_operator(DiffKind::surf_div, _s->R, _s->M).matrix;
}

Eigen::VectorXd NedelecExtension::extend(const Eigen::VectorXd& r,
                                         NedelecStages* out) const
{
  if (r.size() != _s->R->dim())
    throw Error("extend_nedelec: data has the wrong length");
  NedelecStages st;
  const double tol = 1e-8;
  int stage = 1;
  try
  {
    st.g = _SD * r;
    // int div_G r = 0 holds exactly; drop the roundoff in the mean
    const Eigen::VectorXd& a = _s->M->integrals();
    st.g -= (a.dot(st.g) / a.squaredNorm()) * a;
    stage = 2;
    st.v = _rt.extend_meanzero(st.g);
    if (relative_residual(_rt.solver().normal_trace(), st.v, st.g) > tol
        or relative_residual(_rt.solver().div(), st.v,
                             Eigen::VectorXd::Zero(_s->U->dim())) > tol)
      throw Error("normal lifting residual above tolerance");
    stage = 3;
    st.w = _curl.apply(st.v);
    stage = 4;
    st.m = r - _Gt * st.w;
    if (relative_residual(_SD, st.m, Eigen::VectorXd::Zero(_s->M->dim())) > tol)
      throw Error("remainder is not surface divergence-free");
    stage = 5;
    st.phi = _pot.apply(st.m, &st.potential_residual);
    stage = 6;
    st.u = _lift.apply(st.phi);
  }
  catch (const StageError&)
  {
    throw;
  }
  catch (const Error& e)
  {
    throw StageError(stage, e.what());
  }
  Eigen::VectorXd x = st.w + _curl.grad() * st.u;
  if (relative_residual(_Gt, x, r) > tol)
    throw StageError(6, "tangential trace residual above tolerance");
  if (out)
    *out = std::move(st);
  return x;
}

namespace
{

std::shared_ptr<const ComplexSpaces> spaces_of(const FESpace& s)
{
  return ComplexSpaces::create(s.mesh_ptr(), s.degree());
}

void require_family(const FESpace& s, Family f, const char* what)
{
  if (s.family() != f)
    throw Error(std::string(what) + ": expected a " + to_string(f) + " function");
}

} // namespace

FEFunction extend_rt_meanzero(const FEFunction& g)
{
  require_family(g.space(), Family::SurfaceDG, "extend_rt_meanzero");
  auto s = spaces_of(g.space());
  return FEFunction(s->V, RtExtension(s).extend_meanzero(g.coeffs()));
}

FEFunction extend_rt(const FEFunction& g)
{
  require_family(g.space(), Family::SurfaceDG, "extend_rt");
  auto s = spaces_of(g.space());
  return FEFunction(s->V, RtExtension(s).extend(g.coeffs()));
}

FEFunction curl_right_inverse(const FEFunction& v)
{
  require_family(v.space(), Family::RaviartThomas, "curl_right_inverse");
  auto s = spaces_of(v.space());
  return FEFunction(s->N, CurlRightInverse(s).apply(v.coeffs()));
}

FEFunction surface_scalar_potential(const FEFunction& m)
{
  require_family(m.space(), Family::SurfaceRT, "surface_scalar_potential");
  auto s = spaces_of(m.space());
  return FEFunction(s->P, SurfacePotential(s).apply(m.coeffs()));
}

FEFunction discrete_h1_lift(const FEFunction& phi)
{
  require_family(phi.space(), Family::SurfaceLagrange, "discrete_h1_lift");
  auto s = spaces_of(phi.space());
  return FEFunction(s->W, HarmonicLift(s).apply(phi.coeffs()));
}

FEFunction extend_nedelec(const FEFunction& r)
{
  require_family(r.space(), Family::SurfaceRT, "extend_nedelec");
  auto s = spaces_of(r.space());
  return FEFunction(s->N, NedelecExtension(s).extend(r.coeffs()));
}

Eigen::VectorXd extend_rt_oversolve(const ComplexSpaces& coarse,
                                    const Eigen::VectorXd& g, int r)
{
  if (coarse.k != 0)
    throw Error("extend_rt_oversolve: only k = 0 is supported");
  AuxiliaryRefinement aux(coarse.surface, r);
  auto fine = ComplexSpaces::create(aux.fine, 1);
  const SpacePtr Mc = coarse.M;
  auto coarse_value = [&](int t, const Vec3& x) {
    const Eigen::MatrixXd B = Mc->eval(t, {x});
    double v = 0.0;
    for (int i = 0; i < B.cols(); ++i)
      v += B(0, i) * g[Mc->entity_dofs(t)[i]];
    return v;
  };
  const Eigen::VectorXd gf = interpolate(*fine->M, [&](const Vec3& x, int tf) {
    return Eigen::VectorXd::Constant(1, coarse_value(aux.coarse_triangle[tf], x));
  });
  const Eigen::VectorXd sf = RtExtension(fine).extend_meanzero(gf);

  // Coarse RT0 DOFs are face fluxes a_i . (1/|F|) int_F sigma. The fine
  // field is only piecewise polynomial on F, so the flux is summed over the
  // fine faces inside F.
  std::vector<std::vector<int>> children(coarse.mesh->num_cells());
  for (int c = 0; c < aux.fine->num_cells(); ++c)
    children[aux.coarse_cell[c]].push_back(c);
  const auto& CV = coarse.mesh->vertices();
  const auto& FV = aux.fine->vertices();
  const SpacePtr Vc = coarse.V, Vf = fine->V;
  const auto& tri = quadrature::triangle(2);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(Vc->dim());
  for (int cc = 0; cc < coarse.mesh->num_cells(); ++cc)
  {
    const auto& cv = coarse.mesh->cells()[cc];
    Eigen::Matrix3d J;
    for (int i = 0; i < 3; ++i)
      J.col(i) = CV[cv[i + 1]] - CV[cv[0]];
    const Eigen::Matrix3d Jinv = J.inverse();
    auto bary = [&](const Vec3& x) {
      const Vec3 l = Jinv * (x - CV[cv[0]]);
      return Eigen::Vector4d(1.0 - l.sum(), l[0], l[1], l[2]);
    };
    const LocalDofs ld = Vc->local_dofs(cc);
    for (int i = 0; i < Vc->num_local_dofs(); ++i)
    {
      // face of the functional: the barycentric coordinate that vanishes
      // at all its points
      Vec3 a = Vec3::Zero();
      Eigen::Vector4d bmax = Eigen::Vector4d::Zero();
      for (std::size_t q = 0; q < ld.points.size(); ++q)
      {
        const Vec3 wq = ld.weights.block(i, 3 * q, 1, 3).transpose();
        if (wq.norm() == 0.0)
          continue;
        a += wq;
        bmax = bmax.cwiseMax(bary(ld.points[q]).cwiseAbs());
      }
      int lf = 0;
      bmax.minCoeff(&lf);
      Vec3 fa[3];
      for (int j = 0, n = 0; j < 4; ++j)
        if (j != lf)
          fa[n++] = CV[cv[j]];
      const double area = 0.5 * (fa[1] - fa[0]).cross(fa[2] - fa[0]).norm();
      const double tol = 1e-10;
      Vec3 flux = Vec3::Zero();
      for (int c : children[cc])
      {
        const auto& v = aux.fine->cells()[c];
        const auto& dofs = Vf->entity_dofs(c);
        for (int skip = 0; skip < 4; ++skip)
        {
          Vec3 p[3];
          bool on = true;
          for (int j = 0, n = 0; j < 4; ++j)
            if (j != skip)
            {
              p[n++] = FV[v[j]];
              on = on and std::abs(bary(FV[v[j]])[lf]) < tol;
            }
          if (!on)
            continue;
          const double fa_area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
          for (std::size_t q = 0; q < tri.size(); ++q)
          {
            const Vec3 x = tri.points[q][0] * p[0] + tri.points[q][1] * p[1]
                           + tri.points[q][2] * p[2];
            const Eigen::MatrixXd B = Vf->eval(c, {x});
            for (int b = 0; b < B.cols(); ++b)
              flux += tri.weights[q] * fa_area * B.col(b) * sf[dofs[b]];
          }
        }
      }
      out[Vc->entity_dofs(cc)[i]] = a.dot(flux) / area;
    }
  }
  return out;
}

std::string to_string(ExtensionKind k)
{
  return k == ExtensionKind::rt ? "rt" : "nedelec";
}

double operator_norm(const Eigen::MatrixXd& E, const SpMat& A,
                     const Eigen::MatrixXd& B)
{
  Eigen::MatrixXd EAE = E.transpose() * (A * E);
  EAE = 0.5 * (EAE + EAE.transpose());
  return std::sqrt(std::max(linalg::max_generalized_eigenvalue(EAE, B), 0.0));
}

NormEstimate extension_norm_estimate(ExtensionKind which,
                                     std::shared_ptr<const Mesh> mesh, int k,
                                     int r)
{
  auto s = ComplexSpaces::create(mesh, k);
  NormEstimate est;
  if (which == ExtensionKind::rt)
  {
    RtExtension ext(s);
    const Eigen::VectorXd& a = s->M->integrals();
    const int n = static_cast<int>(a.size());
    // orthonormal basis of the complement of a
    Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(a)};
    const Eigen::MatrixXd Q
        = (qr.householderQ() * Eigen::MatrixXd::Identity(n, n)).rightCols(n - 1);
    Eigen::MatrixXd E(s->V->dim(), n - 1);
    const SpMat& T = ext.solver().normal_trace();
    const SpMat& D = ext.solver().div();
    for (int j = 0; j < n - 1; ++j)
    {
      E.col(j) = ext.extend_meanzero(Q.col(j));
      est.trace_residual = std::max(
          est.trace_residual, relative_residual(T, E.col(j), Q.col(j)));
      est.identity_residual
          = std::max(est.identity_residual,
                     relative_residual(D, E.col(j), Eigen::VectorXd::Zero(D.rows())));
    }
    const Eigen::MatrixXd G = hminus_half_gram(s->M, r).dense_matrix;
    const Eigen::MatrixXd B = Q.transpose() * G * Q;
    est.C_L = operator_norm(E, gram(s->V, NormKind::hdiv).sparse_matrix, B);
    est.ndof_volume = s->V->dim();
    est.ndof_trace = n - 1;
  }
  else
  {
    NedelecExtension ext(s);
    const int n = s->R->dim();
    Eigen::MatrixXd E(s->N->dim(), n);
    const SpMat C = diff_operator(DiffKind::curl, s->N, s->V).matrix;
    for (int j = 0; j < n; ++j)
    {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[j] = 1.0;
      NedelecStages st;
      E.col(j) = ext.extend(e, &st);
      est.trace_residual
          = std::max(est.trace_residual,
                     relative_residual(ext.tangential_trace(), E.col(j), e));
      est.identity_residual = std::max(est.identity_residual,
                                       relative_residual(C, E.col(j), st.v));
    }
    const Eigen::MatrixXd B = hminus_half_par_div_gram(s->R, r).dense_matrix;
    est.C_L = operator_norm(E, gram(s->N, NormKind::hcurl).sparse_matrix, B);
    est.ndof_volume = s->N->dim();
    est.ndof_trace = n;
  }
  return est;
}

double trend_slope(const std::vector<double>& y)
{
  const int n = static_cast<int>(y.size());
  if (n < 2)
    return 0.0;
  const double xm = 0.5 * (n - 1);
  double ym = 0.0;
  for (double v : y)
    ym += v;
  ym /= n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i)
  {
    num += (i - xm) * (y[i] - ym);
    den += (i - xm) * (i - xm);
  }
  return num / den;
}

double ExtensionReport::max_over_min() const
{
  double lo = 1e300, hi = 0.0;
  for (const auto& l : levels)
  {
    lo = std::min(lo, l.C_L);
    hi = std::max(hi, l.C_L);
  }
  return levels.empty() ? 0.0 : hi / lo;
}

double ExtensionReport::slope() const
{
  std::vector<double> y;
  for (const auto& l : levels)
    y.push_back(l.C_L);
  return trend_slope(y);
}

nlohmann::json ExtensionReport::to_json() const
{
  nlohmann::json lv = nlohmann::json::array();
  for (const auto& l : levels)
    lv.push_back({{"level", l.level},
                  {"ndof_volume", l.ndof_volume},
                  {"ndof_trace", l.ndof_trace},
                  {"h_min", l.h_min},
                  {"h_max", l.h_max},
                  {"shape_reg", l.shape_reg},
                  {"C_L", l.C_L},
                  {"trace_residual", l.trace_residual},
                  {"identity_residual", l.identity_residual},
                  {"wall_time_s", l.wall_time_s}});
  return {{"family", family},
          {"operator", to_string(which)},
          {"k", k},
          {"resolution", resolution},
          {"mean_handling", which == ExtensionKind::rt
                                ? "data restricted to the zero-mean subspace"
                                : "none (surface divergences have zero mean)"},
          {"levels", lv},
          {"max_over_min", max_over_min()},
          {"slope", slope()}};
}

std::string ExtensionReport::csv() const
{
  std::ostringstream os;
  os << "level,ndof_V,ndof_trace,h_min,h_max,shape_reg,C_L,trace_residual,"
        "identity_residual,wall_time_s\n";
  char buf[512];
  for (const auto& l : levels)
  {
    std::snprintf(buf, sizeof buf,
                  "%d,%d,%d,%.10e,%.10e,%.10e,%.10e,%.3e,%.3e,%.3f\n", l.level,
                  l.ndof_volume, l.ndof_trace, l.h_min, l.h_max, l.shape_reg,
                  l.C_L, l.trace_residual, l.identity_residual, l.wall_time_s);
    os << buf;
  }
  return os.str();
}

ExtensionReport extension_study(ExtensionKind which,
                                const std::vector<std::shared_ptr<const Mesh>>& meshes,
                                const std::string& family, int k, int r,
                                bool record_timings)
{
  ExtensionReport rep;
  rep.family = family;
  rep.which = which;
  rep.k = k;
  rep.resolution = r;
  for (std::size_t l = 0; l < meshes.size(); ++l)
  {
    const auto t0 = std::chrono::steady_clock::now();
    const NormEstimate est = extension_norm_estimate(which, meshes[l], k, r);
    const auto t1 = std::chrono::steady_clock::now();
    ExtensionLevel lv;
    lv.level = static_cast<int>(l);
    lv.ndof_volume = est.ndof_volume;
    lv.ndof_trace = est.ndof_trace;
    lv.h_min = meshes[l]->h_min();
    lv.h_max = meshes[l]->h_max();
    lv.shape_reg = shape_regularity(*meshes[l]);
    lv.C_L = est.C_L;
    lv.trace_residual = est.trace_residual;
    lv.identity_residual = est.identity_residual;
    if (record_timings)
      lv.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    rep.levels.push_back(lv);
  }
  return rep;
}

} // namespace tracelift
