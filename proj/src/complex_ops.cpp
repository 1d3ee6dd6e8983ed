#include "tracelift/complex_ops.h"

#include <cmath>
#include <unordered_map>

namespace tracelift
{

FEFunction SparseOperator::apply(const FEFunction& u) const
{
  if (u.space_ptr() != from)
    throw Error("operator applied to a function of a different space");
  return FEFunction(to, matrix * u.coeffs());
}

namespace
{

enum class Post
{
  none,
  normal,    // dot with the triangle normal
  tangential // cross with the triangle normal
};

void require(bool ok, const std::string& what)
{
  if (!ok)
    throw Error("illegal operator pairing: " + what);
}

SparseOperator assemble(SpacePtr from, SpacePtr to, Deriv d, Post post,
                        const std::string& kind)
{
  const bool trace = !from->is_surface() and to->is_surface();
  const int rs = from->deriv_size(d);
  std::unordered_map<std::uint64_t, double> entries;
  for (int e = 0; e < to->num_entities(); ++e)
  {
    const int src = trace ? to->surface().owner_cell(e) : e;
    LocalDofs ld = to->local_dofs(e);
    Eigen::MatrixXd B = from->eval(src, ld.points, d);
    if (post != Post::none)
    {
      const Vec3 n = to->surface().normal(e);
      const int vs = post == Post::normal ? 1 : 3;
      Eigen::MatrixXd T(vs * ld.points.size(), B.cols());
      for (std::size_t q = 0; q < ld.points.size(); ++q)
        for (int j = 0; j < B.cols(); ++j)
        {
          const Vec3 v = B.block(rs * q, j, 3, 1);
          if (post == Post::normal)
            T(q, j) = v.dot(n);
          else
            T.block(3 * q, j, 3, 1) = v.cross(n);
        }
      B = std::move(T);
    }
    const Eigen::MatrixXd L = ld.weights * B;
    const double tol = 1e-13 * std::max(L.cwiseAbs().maxCoeff(), 1e-300);
    const auto& rows = to->entity_dofs(e);
    const auto& cols = from->entity_dofs(src);
    for (int i = 0; i < L.rows(); ++i)
      for (int j = 0; j < L.cols(); ++j)
        if (std::abs(L(i, j)) > tol)
          entries[(static_cast<std::uint64_t>(rows[i]) << 32)
                  | static_cast<std::uint32_t>(cols[j])]
              = L(i, j);
  }
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(entries.size());
  for (const auto& [key, v] : entries)
    t.emplace_back(static_cast<int>(key >> 32),
                   static_cast<int>(key & 0xffffffffu), v);
  SparseOperator op;
  op.from = std::move(from);
  op.to = std::move(to);
  op.kind = kind;
  op.matrix.resize(op.to->dim(), op.from->dim());
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.matrix.makeCompressed();
  return op;
}

} // namespace

SparseOperator diff_operator(DiffKind kind, SpacePtr from, SpacePtr to)
{
  require(from->degree() == to->degree(), "degree mismatch");
  require(from->mesh_ptr() == to->mesh_ptr(), "spaces on different meshes");
  switch (kind)
  {
  case DiffKind::grad:
    require(from->family() == Family::Lagrange
                and to->family() == Family::Nedelec1,
            "grad needs Lagrange -> Nedelec1");
    return assemble(from, to, Deriv::Grad, Post::none, "grad");
  case DiffKind::curl:
    require(from->family() == Family::Nedelec1
                and to->family() == Family::RaviartThomas,
            "curl needs Nedelec1 -> RaviartThomas");
    return assemble(from, to, Deriv::Curl, Post::none, "curl");
  case DiffKind::div:
    require(from->family() == Family::RaviartThomas
                and to->family() == Family::DG,
            "div needs RaviartThomas -> DG");
    return assemble(from, to, Deriv::Div, Post::none, "div");
  case DiffKind::surf_div:
    require(from->family() == Family::SurfaceRT
                and to->family() == Family::SurfaceDG
                and from->surface_ptr() == to->surface_ptr(),
            "surf_div needs SurfaceRT -> SurfaceDG on one surface");
    return assemble(from, to, Deriv::SurfDiv, Post::none, "surf_div");
  case DiffKind::surf_curl:
    require(from->family() == Family::SurfaceLagrange
                and to->family() == Family::SurfaceRT
                and from->surface_ptr() == to->surface_ptr(),
            "surf_curl needs SurfaceLagrange -> SurfaceRT on one surface");
    return assemble(from, to, Deriv::SurfCurl, Post::none, "surf_curl");
  }
  throw Error("unknown differential");
}

SparseOperator trace_operator(TraceKind kind, SpacePtr from, SpacePtr to)
{
  require(from->degree() == to->degree(), "degree mismatch");
  require(!from->is_surface() and to->is_surface(),
          "trace maps a volume space to a surface space");
  require(to->mesh_ptr() == from->mesh_ptr(),
          "surface does not belong to the volume mesh");
  switch (kind)
  {
  case TraceKind::normal:
    require(from->family() == Family::RaviartThomas
                and to->family() == Family::SurfaceDG,
            "normal trace needs RaviartThomas -> SurfaceDG");
    return assemble(from, to, Deriv::Value, Post::normal, "normal_trace");
  case TraceKind::tangential:
    require(from->family() == Family::Nedelec1
                and to->family() == Family::SurfaceRT,
            "tangential trace needs Nedelec1 -> SurfaceRT");
    return assemble(from, to, Deriv::Value, Post::tangential,
                    "tangential_trace");
  case TraceKind::scalar:
    require(from->family() == Family::Lagrange
                and to->family() == Family::SurfaceLagrange,
            "scalar trace needs Lagrange -> SurfaceLagrange");
    return assemble(from, to, Deriv::Value, Post::none, "scalar_trace");
  }
  throw Error("unknown trace");
}

bool ExactnessReport::exact() const
{
  for (const auto* v : {&full, &essential})
    for (const auto& s : *v)
      if (s.reduced_defect() != 0)
        return false;
  return true;
}

nlohmann::json ExactnessReport::to_json() const
{
  auto slots = [](const std::vector<ExactnessSlot>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : v)
      a.push_back({{"space", s.space},
                   {"dim", s.dim},
                   {"dim_kernel", s.dim_kernel},
                   {"dim_range_in", s.dim_range_in},
                   {"defect", s.defect},
                   {"expected", s.expected},
                   {"reduced_defect", s.reduced_defect()}});
    return a;
  };
  return {{"k", k},
          {"num_cells", num_cells},
          {"full", slots(full)},
          {"essential", slots(essential)},
          {"max_complex_entry", max_complex_entry},
          {"max_complex_entry_rel", max_complex_entry_rel},
          {"exact", exact()}};
}

ExactnessReport verify_exactness(std::shared_ptr<const Mesh> mesh, int k)
{
  auto W = FESpace::create(mesh, Family::Lagrange, k);
  auto N = FESpace::create(mesh, Family::Nedelec1, k);
  auto V = FESpace::create(mesh, Family::RaviartThomas, k);
  auto U = FESpace::create(mesh, Family::DG, k);
  const SpMat G = diff_operator(DiffKind::grad, W, N).matrix;
  const SpMat C = diff_operator(DiffKind::curl, N, V).matrix;
  const SpMat D = diff_operator(DiffKind::div, V, U).matrix;

  ExactnessReport rep;
  rep.k = k;
  rep.num_cells = mesh->num_cells();
  auto max_abs = [](const SpMat& A) {
    double m = 0.0;
    for (int j = 0; j < A.outerSize(); ++j)
      for (SpMat::InnerIterator it(A, j); it; ++it)
        m = std::max(m, std::abs(it.value()));
    return m;
  };
  const double cg = max_abs(C * G), dc = max_abs(D * C);
  rep.max_complex_entry = std::max(cg, dc);
  rep.max_complex_entry_rel = std::max(cg / (max_abs(C) * max_abs(G)),
                                       dc / (max_abs(D) * max_abs(C)));

  auto fill = [](std::vector<ExactnessSlot>& out, const std::vector<int>& dims,
                 const std::vector<int>& ranks,
                 const std::vector<int>& expected) {
    const char* names[] = {"W", "N", "V", "U"};
    for (int s = 0; s < 4; ++s)
    {
      ExactnessSlot sl;
      sl.space = names[s];
      sl.dim = dims[s];
      sl.dim_kernel = dims[s] - (s < 3 ? ranks[s] : 0);
      sl.dim_range_in = s > 0 ? ranks[s - 1] : 0;
      sl.defect = sl.dim_kernel - sl.dim_range_in;
      sl.expected = expected[s];
      out.push_back(sl);
    }
  };

  {
    std::vector<int> ranks
        = {linalg::numeric_rank(Eigen::MatrixXd(G)),
           linalg::numeric_rank(Eigen::MatrixXd(C)),
           linalg::numeric_rank(Eigen::MatrixXd(D))};
    fill(rep.full, {W->dim(), N->dim(), V->dim(), U->dim()}, ranks,
         {1, 0, 0, 0});
  }
  {
    auto interior = [](const FESpace& s) {
      std::vector<char> m(s.dim());
      for (int i = 0; i < s.dim(); ++i)
        m[i] = !s.boundary_dofs()[i];
      return m;
    };
    const auto w0 = interior(*W), n0 = interior(*N), v0 = interior(*V);
    const std::vector<char> u0(U->dim(), 1);
    SpMat G0 = linalg::select(G, n0, w0);
    SpMat C0 = linalg::select(C, v0, n0);
    SpMat D0 = linalg::select(D, u0, v0);
    std::vector<int> ranks = {linalg::numeric_rank(Eigen::MatrixXd(G0)),
                              linalg::numeric_rank(Eigen::MatrixXd(C0)),
                              linalg::numeric_rank(Eigen::MatrixXd(D0))};
    fill(rep.essential,
         {static_cast<int>(G0.cols()), static_cast<int>(C0.cols()),
          static_cast<int>(D0.cols()), static_cast<int>(D0.rows())},
         ranks, {0, 0, 0, 1});
  }
  return rep;
}

} // namespace tracelift
