#include "tracelift/study.h"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tracelift;

namespace
{

using MeshPtr = std::shared_ptr<const Mesh>;
using SurfacePtr = std::shared_ptr<const SurfaceMesh>;
using SpacesPtr = std::shared_ptr<const ComplexSpaces>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CellMatrix = Eigen::Matrix<int, Eigen::Dynamic, 4, Eigen::RowMajor>;

py::object to_py(const nlohmann::json& j)
{
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o)
{
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

DiffKind diff_kind(const std::string& s)
{
  if (s == "grad")
    return DiffKind::grad;
  if (s == "curl")
    return DiffKind::curl;
  if (s == "div")
    return DiffKind::div;
  if (s == "surf_div")
    return DiffKind::surf_div;
  if (s == "surf_curl")
    return DiffKind::surf_curl;
  throw Error("unknown differential '" + s + "'");
}

TraceKind trace_kind(const std::string& s)
{
  if (s == "normal")
    return TraceKind::normal;
  if (s == "tangential")
    return TraceKind::tangential;
  if (s == "scalar")
    return TraceKind::scalar;
  throw Error("unknown trace '" + s + "'");
}

ExtensionKind extension_kind(const std::string& s)
{
  if (s == "rt")
    return ExtensionKind::rt;
  if (s == "nedelec")
    return ExtensionKind::nedelec;
  throw Error("unknown extension '" + s + "'");
}

ProblemKind problem_kind(const std::string& s)
{
  if (s == "mixed")
    return ProblemKind::mixed;
  if (s == "curlcurl")
    return ProblemKind::curlcurl;
  throw Error("unknown problem '" + s + "'");
}

NormKind volume_norm(const std::string& s)
{
  for (NormKind k : {NormKind::l2, NormKind::h1, NormKind::hdiv, NormKind::hcurl})
    if (to_string(k) == s)
      return k;
  throw Error("unknown norm '" + s + "'");
}

Eigen::MatrixXd to_dense(const NormOperator& op)
{
  return op.dense();
}

} // namespace

PYBIND11_MODULE(_tracelift, m)
{
  m.doc() = "Tetrahedral finite element complexes and discrete trace extensions";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<StageError>(m, "StageError", error.ptr());
  py::register_exception<MeshError>(m, "MeshError", error.ptr());

  py::classh<Mesh>(m, "Mesh")
      .def(py::init([](const RowMatrix& vertices, const CellMatrix& cells) {
             if (vertices.cols() != 3)
               throw Error("vertices must have shape (n, 3)");
             std::vector<Vec3> v(vertices.rows());
             for (Eigen::Index i = 0; i < vertices.rows(); ++i)
               v[i] = vertices.row(i).transpose();
             std::vector<std::array<int, 4>> c(cells.rows());
             for (Eigen::Index i = 0; i < cells.rows(); ++i)
               for (int j = 0; j < 4; ++j)
                 c[i][j] = cells(i, j);
             return std::make_shared<const Mesh>(std::move(v), std::move(c));
           }),
           py::arg("vertices"), py::arg("cells"))
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_cells", &Mesh::num_cells)
      .def_property_readonly("num_faces", &Mesh::num_faces)
      .def_property_readonly("h_min", &Mesh::h_min)
      .def_property_readonly("h_max", &Mesh::h_max)
      .def_property_readonly("vertices",
                             [](const Mesh& me) {
                               RowMatrix v(me.num_vertices(), 3);
                               for (int i = 0; i < me.num_vertices(); ++i)
                                 v.row(i) = me.vertices()[i].transpose();
                               return v;
                             })
      .def_property_readonly("cells", [](const Mesh& me) {
        CellMatrix c(me.num_cells(), 4);
        for (int i = 0; i < me.num_cells(); ++i)
          for (int j = 0; j < 4; ++j)
            c(i, j) = me.cells()[i][j];
        return c;
      });

  m.def("unit_cube_mesh", [](int n) { return std::make_shared<const Mesh>(unit_cube_mesh(n)); },
        py::arg("n") = 1);
  m.def("l_prism_mesh", [](int n) { return std::make_shared<const Mesh>(l_prism_mesh(n)); },
        py::arg("n") = 1);
  m.def("load_mesh", [](const std::string& path) {
    return std::make_shared<const Mesh>(load_mesh_file(path));
  });
  m.def("refine_uniform", [](const MeshPtr& me) {
    return std::make_shared<const Mesh>(refine(*me, RefineMode::uniform));
  });
  m.def("shape_regularity", [](const MeshPtr& me) { return shape_regularity(*me); });
  m.def("mesh_family", [](const std::string& domain, const std::string& kind, int levels) {
    return mesh_family(domain, mesh_family_from_string(kind), levels);
  }, py::arg("domain"), py::arg("kind"), py::arg("levels"));
  m.def("family_csv", &family_csv);

  py::classh<SurfaceMesh>(m, "SurfaceMesh")
      .def(py::init<MeshPtr>())
      .def_property_readonly("num_triangles", &SurfaceMesh::num_triangles)
      .def_property_readonly("mesh", &SurfaceMesh::mesh_ptr)
      .def("area", &SurfaceMesh::area)
      .def("normal", [](const SurfaceMesh& s, int t) { return Eigen::Vector3d(s.normal(t)); });

  py::classh<FESpace>(m, "FESpace")
      .def_static("create",
                  [](const MeshPtr& me, const std::string& family, int k, bool mean_zero) {
                    return FESpace::create(me, family_from_string(family), k, mean_zero);
                  },
                  py::arg("mesh"), py::arg("family"), py::arg("k"), py::arg("mean_zero") = false)
      .def_static("create",
                  [](const SurfacePtr& s, const std::string& family, int k, bool mean_zero) {
                    return FESpace::create(s, family_from_string(family), k, mean_zero);
                  },
                  py::arg("surface"), py::arg("family"), py::arg("k"),
                  py::arg("mean_zero") = false)
      .def_property_readonly("dim", &FESpace::dim)
      .def_property_readonly("degree", &FESpace::degree)
      .def_property_readonly("family", [](const FESpace& s) { return to_string(s.family()); })
      .def_property_readonly("integrals", &FESpace::integrals);

  m.def("diff_operator", [](const std::string& kind, SpacePtr from, SpacePtr to) {
    return diff_operator(diff_kind(kind), from, to).matrix;
  }, py::arg("kind"), py::arg("from_space"), py::arg("to_space"));
  m.def("trace_operator", [](const std::string& kind, SpacePtr from, SpacePtr to) {
    return trace_operator(trace_kind(kind), from, to).matrix;
  }, py::arg("kind"), py::arg("from_space"), py::arg("to_space"));
  m.def("verify_exactness", [](const MeshPtr& me, int k) {
    return to_py(verify_exactness(me, k).to_json());
  }, py::arg("mesh"), py::arg("k"));

  m.def("mass_matrix", [](const SpacePtr& s) { return mass_matrix(*s); });
  m.def("gram", [](const SpacePtr& s, const std::string& kind) {
    return gram(s, volume_norm(kind)).sparse_matrix;
  }, py::arg("space"), py::arg("kind"));
  m.def("slobodetskij_gram",
        [](const SpacePtr& s, double order, bool seminorm_only, int dense_limit) {
          return to_dense(slobodetskij_gram(s, order, seminorm_only, dense_limit));
        },
        py::arg("space"), py::arg("s") = 0.5, py::arg("seminorm_only") = false,
        py::arg("dense_limit") = 2000, py::call_guard<py::gil_scoped_release>());
  m.def("hminus_half_gram",
        [](const SpacePtr& M, int r) { return to_dense(hminus_half_gram(M, r)); },
        py::arg("M"), py::arg("r") = 2, py::call_guard<py::gil_scoped_release>());
  m.def("hminus_half_par_div_gram",
        [](const SpacePtr& R, int r) { return to_dense(hminus_half_par_div_gram(R, r)); },
        py::arg("R"), py::arg("r") = 2, py::call_guard<py::gil_scoped_release>());

  py::classh<ComplexSpaces>(m, "ComplexSpaces")
      .def_static("create", &ComplexSpaces::create, py::arg("mesh"), py::arg("k"))
      .def_readonly("mesh", &ComplexSpaces::mesh)
      .def_readonly("surface", &ComplexSpaces::surface)
      .def_readonly("k", &ComplexSpaces::k)
      .def_readonly("W", &ComplexSpaces::W)
      .def_readonly("N", &ComplexSpaces::N)
      .def_readonly("V", &ComplexSpaces::V)
      .def_readonly("U", &ComplexSpaces::U)
      .def_readonly("P", &ComplexSpaces::P)
      .def_readonly("R", &ComplexSpaces::R)
      .def_readonly("M", &ComplexSpaces::M);

  py::classh<RtExtension>(m, "RtExtension")
      .def(py::init<SpacesPtr>())
      .def("extend_meanzero", &RtExtension::extend_meanzero, py::arg("g"))
      .def("extend", &RtExtension::extend, py::arg("g"))
      .def_property_readonly("normal_trace",
                             [](const RtExtension& e) { return e.solver().normal_trace(); })
      .def_property_readonly("div", [](const RtExtension& e) { return e.solver().div(); });

  py::classh<SurfacePotential>(m, "SurfacePotential")
      .def(py::init<SpacesPtr>())
      .def("apply",
           [](const SurfacePotential& p, const Eigen::VectorXd& v) {
             double res = 0.0;
             Eigen::VectorXd phi = p.apply(v, &res);
             return py::make_tuple(phi, res);
           },
           py::arg("m"))
      .def_property_readonly("surf_curl", &SurfacePotential::surf_curl);

  py::classh<NedelecExtension>(m, "NedelecExtension")
      .def(py::init<SpacesPtr>())
      .def("extend", [](const NedelecExtension& e, const Eigen::VectorXd& r) { return e.extend(r); },
           py::arg("r"))
      .def("extend_stages",
           [](const NedelecExtension& e, const Eigen::VectorXd& r) {
             NedelecStages st;
             Eigen::VectorXd x = e.extend(r, &st);
             py::dict d;
             d["result"] = x;
             d["g"] = st.g;
             d["v"] = st.v;
             d["w"] = st.w;
             d["m"] = st.m;
             d["phi"] = st.phi;
             d["u"] = st.u;
             d["potential_residual"] = st.potential_residual;
             return d;
           },
           py::arg("r"))
      .def_property_readonly("tangential_trace", &NedelecExtension::tangential_trace)
      .def_property_readonly("surf_div", &NedelecExtension::surf_div);

  m.def("extend_rt_oversolve",
        [](const SpacesPtr& s, const Eigen::VectorXd& g, int r) {
          return extend_rt_oversolve(*s, g, r);
        },
        py::arg("spaces"), py::arg("g"), py::arg("r") = 1);
  m.def("extension_norm_estimate",
        [](const std::string& which, const MeshPtr& me, int k, int r) {
          NormEstimate e;
          {
            py::gil_scoped_release nogil;
            e = extension_norm_estimate(extension_kind(which), me, k, r);
          }
          py::dict d;
          d["C_L"] = e.C_L;
          d["ndof_volume"] = e.ndof_volume;
          d["ndof_trace"] = e.ndof_trace;
          d["trace_residual"] = e.trace_residual;
          d["identity_residual"] = e.identity_residual;
          return d;
        },
        py::arg("which"), py::arg("mesh"), py::arg("k") = 0, py::arg("r") = 1);

  m.def("verify_inverse_inequality",
        [](const std::vector<MeshPtr>& meshes, int k, int samples, unsigned seed, int r,
           int dense_limit) {
          return to_py(verify_inverse_inequality(meshes, k, samples, seed, r, dense_limit)
                           .to_json());
        },
        py::arg("meshes"), py::arg("k") = 0, py::arg("samples") = 50,
        py::arg("seed") = 1234, py::arg("r") = 1, py::arg("dense_limit") = 2000);
  m.def("potential_ratio_study",
        [](const std::vector<MeshPtr>& meshes, int k, int samples, unsigned seed, int r,
           int dense_limit) {
          return to_py(
              potential_ratio_study(meshes, k, samples, seed, r, dense_limit).to_json());
        },
        py::arg("meshes"), py::arg("k") = 0, py::arg("samples") = 50,
        py::arg("seed") = 1234, py::arg("r") = 1, py::arg("dense_limit") = 2000);
  m.def("decoupled_error_study",
        [](const std::string& problem, const std::vector<MeshPtr>& meshes, int k,
           const std::vector<double>& eps, unsigned seed, int r) {
          ErrorStudyTable t = decoupled_error_study(problem_kind(problem), meshes, k, eps,
                                                    seed, r);
          py::dict d = to_py(t.to_json());
          d["csv"] = t.csv();
          return d;
        },
        py::arg("problem"), py::arg("meshes"), py::arg("k") = 0,
        py::arg("eps") = std::vector<double>{0.0, 1.0, 64.0},
        py::arg("seed") = 1234, py::arg("r") = 1);

  m.def("study_names", &study_names);
  m.def("run",
        [](const py::object& config) {
          const StudyConfig cfg = StudyConfig::from_json(from_py(config));
          RunResult r;
          {
            py::gil_scoped_release nogil;
            r = run(cfg);
          }
          py::dict d;
          d["exit_code"] = r.exit_code;
          d["report"] = to_py(r.report);
          d["summary"] = r.summary;
          return d;
        },
        py::arg("config"));
}
