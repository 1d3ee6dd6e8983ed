#include "tracelift/study.h"

#include <Eigen/QR>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace tracelift
{

std::string to_string(MeshFamily f)
{
  switch (f)
  {
  case MeshFamily::uniform:
    return "uniform";
  case MeshFamily::boundary_graded:
    return "boundary_graded";
  case MeshFamily::vertex_graded:
    return "vertex_graded";
  }
  return "?";
}

MeshFamily mesh_family_from_string(const std::string& s)
{
  if (s == "uniform")
    return MeshFamily::uniform;
  if (s == "boundary_graded")
    return MeshFamily::boundary_graded;
  if (s == "vertex_graded")
    return MeshFamily::vertex_graded;
  throw ConfigError("unknown mesh family '" + s + "'");
}

namespace
{

Mesh base_mesh(const std::string& domain)
{
  if (domain == "cube")
    return unit_cube_mesh(1);
  if (domain == "lprism")
    return l_prism_mesh(1);
  throw ConfigError("unknown domain '" + domain + "'");
}

// grading target: a corner of the cube, the re-entrant corner of the prism
Vec3 graded_vertex(const std::string& domain)
{
  return domain == "cube" ? Vec3(1, 0, 0) : Vec3(1, 1, 0);
}

std::set<int> touching(const Mesh& m, MeshFamily kind, const Vec3& corner)
{
  std::vector<char> on(m.num_vertices(), 0);
  if (kind == MeshFamily::boundary_graded)
  {
    for (int f = 0; f < m.num_faces(); ++f)
      if (m.is_boundary_face(f))
        for (int v : m.faces()[f])
          on[v] = 1;
  }
  else
  {
    for (int v = 0; v < m.num_vertices(); ++v)
      on[v] = (m.vertices()[v] - corner).norm() < 1e-12;
  }
  std::set<int> mk;
  for (int c = 0; c < m.num_cells(); ++c)
    for (int v : m.cells()[c])
      if (on[v])
      {
        mk.insert(c);
        break;
      }
  return mk;
}

} // namespace

std::vector<std::shared_ptr<const Mesh>>
mesh_family(const std::string& domain, MeshFamily kind, int levels)
{
  if (levels < 1)
    throw ConfigError("mesh_family needs at least one level");
  std::vector<std::shared_ptr<const Mesh>> out;
  Mesh m = base_mesh(domain);
  // on the coarsest mesh the closure of a vertex refinement reaches every
  // cell (they share the refinement edge), so grading starts one level up
  if (kind == MeshFamily::vertex_graded)
    m = refine(m, RefineMode::uniform);
  const Vec3 corner = graded_vertex(domain);
  for (int l = 0; l < levels; ++l)
  {
    if (l > 0)
    {
      if (kind == MeshFamily::uniform)
        m = refine(m, RefineMode::uniform);
      else
        for (int round = 0; round < 3; ++round)
          m = refine(m, RefineMode::bisection, touching(m, kind, corner));
    }
    out.push_back(std::make_shared<const Mesh>(m));
  }
  return out;
}

std::string family_csv(const std::vector<std::shared_ptr<const Mesh>>& meshes)
{
  std::ostringstream os;
  os << "level,cells,boundary_triangles,h_min,h_max,grading,shape_reg,"
        "max_boundary_diameter\n";
  char buf[256];
  for (std::size_t l = 0; l < meshes.size(); ++l)
  {
    const Mesh& m = *meshes[l];
    SurfaceMesh s(meshes[l]);
    double dmax = 0.0;
    for (int t = 0; t < s.num_triangles(); ++t)
      dmax = std::max(dmax, s.diameter(t));
    std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.10e,%.10e,%.10e,%.10e,%.10e\n",
                  l, m.num_cells(), s.num_triangles(), m.h_min(), m.h_max(),
                  m.h_max() / m.h_min(), shape_regularity(m), dmax);
    os << buf;
  }
  return os.str();
}

const std::vector<std::string>& study_names()
{
  static const std::vector<std::string> names{
      "lemma32", "rt_norm", "nedelec_norm", "exactness", "corollaries", "lemma42"};
  return names;
}

int study_exit_code(const std::string& study)
{
  const auto& n = study_names();
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n[i] == study)
      return 3 + static_cast<int>(i);
  throw ConfigError("unknown study '" + study + "'");
}

StudyConfig StudyConfig::from_json(const nlohmann::json& j)
{
  if (!j.is_object())
    throw ConfigError("config must be a JSON object");
  static const std::set<std::string> keys{
      "domain", "family",  "levels",   "degree",      "resolution",
      "studies", "seed",   "out",      "dense_limit", "samples",
      "eps",     "eps_dominant", "jobs"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key()))
      throw ConfigError("unknown config key '" + it.key() + "'");
  StudyConfig c;
  try
  {
    c.domain = j.value("domain", c.domain);
    c.family = mesh_family_from_string(j.value("family", to_string(c.family)));
    c.levels = j.value("levels", c.levels);
    c.degree = j.value("degree", c.degree);
    c.resolution = j.value("resolution", c.resolution);
    c.studies = j.value("studies", c.studies);
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
    c.dense_limit = j.value("dense_limit", c.dense_limit);
    c.samples = j.value("samples", c.samples);
    c.eps = j.value("eps", c.eps);
    c.eps_dominant = j.value("eps_dominant", c.eps_dominant);
    c.jobs = j.value("jobs", c.jobs);
  }
  catch (const nlohmann::json::exception& e)
  {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json StudyConfig::to_json() const
{
  return {{"domain", domain},
          {"family", to_string(family)},
          {"levels", levels},
          {"degree", degree},
          {"resolution", resolution},
          {"studies", studies},
          {"seed", seed},
          {"out", out},
          {"dense_limit", dense_limit},
          {"samples", samples},
          {"eps", eps},
          {"eps_dominant", eps_dominant},
          {"jobs", jobs}};
}

void StudyConfig::validate() const
{
  if (domain != "cube" and domain != "lprism")
    throw ConfigError("unknown domain '" + domain + "'");
  if (levels < 1)
    throw ConfigError("levels must be >= 1");
  if (degree < 0 or degree > 1)
    throw ConfigError("degree must be 0 or 1");
  if (resolution < 0)
    throw ConfigError("resolution must be >= 0");
  if (studies.empty())
    throw ConfigError("no studies requested");
  for (const auto& s : studies)
  {
    study_exit_code(s);
    const bool trend = s == "lemma32" or s == "rt_norm" or s == "nedelec_norm"
                       or s == "corollaries" or s == "lemma42";
    if (trend and levels < 2)
      throw ConfigError("study '" + s + "' needs levels >= 2 (a trend needs two points)");
  }
  if (samples < 1)
    throw ConfigError("samples must be >= 1");
  if (dense_limit < 1)
    throw ConfigError("dense_limit must be >= 1");
  if (jobs < 1)
    throw ConfigError("jobs must be >= 1");
  for (double e : eps)
    if (e < 0.0 or !std::isfinite(e))
      throw ConfigError("eps values must be finite and >= 0");
}

namespace
{

Eigen::VectorXd normal_vector(int n, std::mt19937& rng)
{
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i)
    v[i] = N(rng);
  return v;
}

double max_over_min_of(const std::vector<double>& v)
{
  if (v.empty())
    return 0.0;
  double lo = 1e300, hi = 0.0;
  for (double x : v)
    lo = std::min(lo, x), hi = std::max(hi, x);
  return hi / lo;
}

std::string fmt(const char* f, double x)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// Orthonormal basis of the complement of v.
Eigen::MatrixXd complement(const Eigen::VectorXd& v)
{
  const int n = static_cast<int>(v.size());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(v)};
  return (qr.householderQ() * Eigen::MatrixXd::Identity(n, n)).rightCols(n - 1);
}

} // namespace

std::vector<double> InverseInequalityTable::maxima() const
{
  std::vector<double> m;
  for (const auto& r : rows)
    m.push_back(r.exact_max >= 0.0 ? r.exact_max
                                   : std::max(r.max_sampled, r.max_bump));
  return m;
}

double InverseInequalityTable::max_over_min() const
{
  return max_over_min_of(maxima());
}

std::string InverseInequalityTable::csv() const
{
  std::ostringstream os;
  os << "level,ndof,h_min,h_max,max_sampled,max_bump,exact_max\n";
  char buf[256];
  for (const auto& r : rows)
  {
    std::snprintf(buf, sizeof buf, "%d,%d,%.10e,%.10e,%.10e,%.10e,%.10e\n",
                  r.level, r.ndof, r.h_min, r.h_max, r.max_sampled, r.max_bump,
                  r.exact_max);
    os << buf;
  }
  return os.str();
}

nlohmann::json InverseInequalityTable::to_json() const
{
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"level", r.level},
                  {"ndof", r.ndof},
                  {"h_min", r.h_min},
                  {"h_max", r.h_max},
                  {"max_sampled", r.max_sampled},
                  {"max_bump", r.max_bump},
                  {"exact_max", r.exact_max}});
  return {{"rows", rs}, {"max_over_min", max_over_min()}};
}

InverseInequalityTable
verify_inverse_inequality(const std::vector<std::shared_ptr<const Mesh>>& meshes,
                          int k, int samples, unsigned seed, int r,
                          int dense_limit)
{
  InverseInequalityTable table;
  std::mt19937 rng(seed);
  for (std::size_t l = 0; l < meshes.size(); ++l)
  {
    auto surf = std::make_shared<const SurfaceMesh>(meshes[l]);
    SpacePtr M = FESpace::create(surf, Family::SurfaceDG, k);
    // sum_F h_F |g|_F^2: the mass matrix with rows scaled by h_F
    SpMat H = mass_matrix(*M);
    Eigen::VectorXd h(M->dim());
    for (int t = 0; t < surf->num_triangles(); ++t)
      for (int d : M->entity_dofs(t))
        h[d] = surf->diameter(t);
    H = h.asDiagonal() * H;
    const Eigen::MatrixXd G = hminus_half_gram(M, r).dense_matrix;
    auto ratio = [&](const Eigen::VectorXd& g) {
      return g.dot(H * g) / g.dot(G * g);
    };

    InverseInequalityRow row;
    row.level = static_cast<int>(l);
    row.ndof = M->dim();
    row.h_min = meshes[l]->h_min();
    row.h_max = meshes[l]->h_max();
    const Eigen::VectorXd& a = M->integrals();
    for (int s = 0; s < samples; ++s)
    {
      Eigen::VectorXd g = normal_vector(M->dim(), rng);
      g -= (a.dot(g) / a.squaredNorm()) * a;
      row.max_sampled = std::max(row.max_sampled, ratio(g));
    }
    for (int i = 0; i < M->dim(); ++i)
    {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(M->dim());
      g[i] = 1.0;
      row.max_bump = std::max(row.max_bump, ratio(g));
    }
    if (M->dim() <= dense_limit)
    {
      Eigen::MatrixXd Hd(H);
      Hd = 0.5 * (Hd + Hd.transpose());
      row.exact_max = linalg::max_generalized_eigenvalue(Hd, G);
    }
    table.rows.push_back(row);
  }
  return table;
}

std::vector<double> PotentialRatioTable::maxima() const
{
  std::vector<double> m;
  for (const auto& r : rows)
    m.push_back(r.exact_max >= 0.0 ? r.exact_max : r.max_sampled);
  return m;
}

double PotentialRatioTable::max_over_min() const
{
  return max_over_min_of(maxima());
}

std::string PotentialRatioTable::csv() const
{
  std::ostringstream os;
  os << "level,ndof,max_sampled,exact_max,exact_min\n";
  char buf[256];
  for (const auto& r : rows)
  {
    std::snprintf(buf, sizeof buf, "%d,%d,%.10e,%.10e,%.10e\n", r.level,
                  r.ndof, r.max_sampled, r.exact_max, r.exact_min);
    os << buf;
  }
  return os.str();
}

nlohmann::json PotentialRatioTable::to_json() const
{
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"level", r.level},
                  {"ndof", r.ndof},
                  {"max_sampled", r.max_sampled},
                  {"exact_max", r.exact_max},
                  {"exact_min", r.exact_min}});
  return {{"rows", rs}, {"max_over_min", max_over_min()}};
}

PotentialRatioTable
potential_ratio_study(const std::vector<std::shared_ptr<const Mesh>>& meshes,
                      int k, int samples, unsigned seed, int r, int dense_limit)
{
  PotentialRatioTable table;
  std::mt19937 rng(seed);
  for (std::size_t l = 0; l < meshes.size(); ++l)
  {
    auto surf = std::make_shared<const SurfaceMesh>(meshes[l]);
    SpacePtr P = FESpace::create(surf, Family::SurfaceLagrange, k);
    SpacePtr R = FESpace::create(surf, Family::SurfaceRT, k);
    const Eigen::MatrixXd S = slobodetskij_gram(P, 0.5, false, dense_limit).dense_matrix;
    const Eigen::MatrixXd B = hminus_half_par_div_gram(R, r).dense_matrix;
    const Eigen::MatrixXd SC(diff_operator(DiffKind::surf_curl, P, R).matrix);
    // constants have unit Lagrange coefficients
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(P->dim());
    const Eigen::VectorXd S1 = S * one;
    const Eigen::MatrixXd Sq = S - S1 * S1.transpose() / one.dot(S1);
    const Eigen::MatrixXd C = SC.transpose() * B * SC;

    PotentialRatioRow row;
    row.level = static_cast<int>(l);
    row.ndof = P->dim();
    for (int s = 0; s < samples; ++s)
    {
      const Eigen::VectorXd phi = normal_vector(P->dim(), rng);
      row.max_sampled = std::max(row.max_sampled,
                                 std::sqrt(phi.dot(Sq * phi) / phi.dot(C * phi)));
    }
    const Eigen::MatrixXd Q = complement(one);
    Eigen::MatrixXd A = Q.transpose() * Sq * Q;
    Eigen::MatrixXd Bq = Q.transpose() * C * Q;
    A = 0.5 * (A + A.transpose());
    Bq = 0.5 * (Bq + Bq.transpose());
    const Eigen::VectorXd ev = linalg::generalized_eigenvalues(A, Bq);
    row.exact_min = std::sqrt(std::max(ev[0], 0.0));
    row.exact_max = std::sqrt(ev[ev.size() - 1]);
    table.rows.push_back(row);
  }
  return table;
}

namespace
{

StudyOutcome fail(StudyOutcome o, const std::string& msg)
{
  if (o.passed)
  {
    o.passed = false;
    o.message = msg;
  }
  else
    o.message += "; " + msg;
  return o;
}

std::string status(const StudyOutcome& o)
{
  return o.passed ? "PASS" : "FAIL (" + o.message + ")";
}

StudyOutcome study_lemma32(const StudyConfig& cfg,
                           const std::vector<std::shared_ptr<const Mesh>>& meshes)
{
  StudyOutcome o;
  InverseInequalityTable t = verify_inverse_inequality(
      meshes, cfg.degree, cfg.samples, cfg.seed, cfg.resolution, cfg.dense_limit);
  const double bound = cfg.family == MeshFamily::uniform ? 2.0 : 3.0;
  const double mm = t.max_over_min();
  if (mm > bound)
  {
    const auto m = t.maxima();
    const int worst = static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
    o = fail(o, "max ratio max/min " + fmt("%.4g", mm) + " > " + fmt("%.1f", bound)
                    + " (largest at level " + std::to_string(worst) + ")");
  }
  o.data = t.to_json();
  o.files["lemma32.csv"] = t.csv();
  std::ostringstream md;
  md << "## lemma32: inverse inequality\n\n"
     << "max/min of the per-level maximum ratio: " << fmt("%.4f", mm)
     << " (bound " << bound << "); trend slope "
     << fmt("%.3e", trend_slope(t.maxima())) << "\n\n";
  o.summary = md.str();
  return o;
}

StudyOutcome study_norm(ExtensionKind which, const StudyConfig& cfg,
                        const std::vector<std::shared_ptr<const Mesh>>& meshes)
{
  StudyOutcome o;
  ExtensionReport rep = extension_study(which, meshes, to_string(cfg.family),
                                        cfg.degree, cfg.resolution);
  const double mm = rep.max_over_min();
  const double slope = rep.slope();
  const double c0 = rep.levels.front().C_L;
  if (mm > 3.0)
    o = fail(o, "C_L max/min " + fmt("%.4g", mm) + " > 3");
  if (slope > 0.05 * c0)
    o = fail(o, "C_L slope " + fmt("%.4g", slope) + " > 0.05 C_L(0)");
  for (const auto& l : rep.levels)
  {
    if (l.trace_residual > 1e-9)
      o = fail(o, "trace residual " + fmt("%.3e", l.trace_residual) + " at level "
                      + std::to_string(l.level));
    if (l.identity_residual > 1e-9)
      o = fail(o, "identity residual " + fmt("%.3e", l.identity_residual)
                      + " at level " + std::to_string(l.level));
  }
  o.data = rep.to_json();
  const std::string name = which == ExtensionKind::rt ? "rt_norm" : "nedelec_norm";
  o.files[name + ".csv"] = rep.csv();
  std::ostringstream md;
  md << "## " << name << ": uniform boundedness of the extension\n\n"
     << "| level | ndof trace | C_L |\n|---|---|---|\n";
  for (const auto& l : rep.levels)
    md << "| " << l.level << " | " << l.ndof_trace << " | " << fmt("%.6f", l.C_L) << " |\n";
  md << "\nmax/min " << fmt("%.4f", mm) << ", slope " << fmt("%.3e", slope)
     << " per level (limit " << fmt("%.3e", 0.05 * c0) << ")\n\n";
  o.summary = md.str();
  return o;
}

StudyOutcome study_exactness(const StudyConfig& cfg,
                             const std::vector<std::shared_ptr<const Mesh>>& meshes)
{
  StudyOutcome o;
  nlohmann::json levels = nlohmann::json::array();
  std::ostringstream csv;
  csv << "level,complex,slot,space,dim,dim_kernel,dim_range_in,defect,expected\n";
  for (std::size_t l = 0; l < meshes.size(); ++l)
  {
    ExactnessReport r = verify_exactness(meshes[l], cfg.degree);
    if (!r.exact())
      o = fail(o, "nonzero defect at level " + std::to_string(l));
    levels.push_back(r.to_json());
    for (const char* which : {"full", "essential"})
    {
      const auto& slots = std::string(which) == "full" ? r.full : r.essential;
      for (std::size_t i = 0; i < slots.size(); ++i)
        csv << l << "," << which << "," << i << "," << slots[i].space << ","
            << slots[i].dim << "," << slots[i].dim_kernel << ","
            << slots[i].dim_range_in << "," << slots[i].defect << ","
            << slots[i].expected << "\n";
    }
  }
  o.data = {{"levels", levels}};
  o.files["exactness.csv"] = csv.str();
  o.summary = "## exactness: discrete de Rham complexes\n\n"
              + std::string(o.passed ? "all reduced defects are zero" : o.message)
              + "\n\n";
  return o;
}

StudyOutcome study_corollaries(const StudyConfig& cfg,
                               const std::vector<std::shared_ptr<const Mesh>>& meshes)
{
  StudyOutcome o;
  std::ostringstream md;
  md << "## corollaries: decoupled error estimates\n\n";
  nlohmann::json data;
  int n_dominant = 0;
  for (double e : cfg.eps)
    n_dominant += e >= cfg.eps_dominant and e > 0.0;
  for (auto p : {ProblemKind::mixed, ProblemKind::curlcurl})
  {
    const std::string name = to_string(p);
    ErrorStudyTable t = decoupled_error_study(p, meshes, cfg.degree, cfg.eps,
                                              cfg.seed, cfg.resolution);
    md << "### " << name << "\n\n";
    for (double e : cfg.eps)
    {
      const double drift = t.effectivity_drift(e);
      md << "- eps " << e << ": effectivity drift " << fmt("%.4f", drift) << "\n";
      if (drift > 3.0)
        o = fail(o, name + ": effectivity drift " + fmt("%.4g", drift)
                        + " > 3 at eps " + fmt("%g", e));
    }
    if (n_dominant >= 2)
      for (std::size_t l = 0; l < meshes.size(); ++l)
      {
        const double s = t.noise_slope(static_cast<int>(l), cfg.eps_dominant);
        md << "- level " << l << ": boundary-term slope " << fmt("%.4f", s) << "\n";
        if (std::abs(s - 1.0) > 0.2)
          o = fail(o, name + ": boundary-term slope " + fmt("%.4g", s)
                          + " at level " + std::to_string(l));
      }
    const bool has_zero = std::find(cfg.eps.begin(), cfg.eps.end(), 0.0) != cfg.eps.end();
    if (cfg.family == MeshFamily::uniform and cfg.degree == 0 and has_zero
        and meshes.size() >= 3)
    {
      // mixed: L2 flux error; curlcurl: H(curl) error
      const double order = t.convergence_order(
          p == ProblemKind::mixed ? "l2_error" : "total_error", 1);
      md << "- convergence order (levels >= 1): " << fmt("%.4f", order) << "\n";
      if (std::abs(order - 1.0) > 0.2)
        o = fail(o, name + ": convergence order " + fmt("%.4g", order));
    }
    md << "\n";
    data[name] = t.to_json();
    o.files["corollaries_" + name + ".csv"] = t.csv();
  }
  o.data = data;
  o.summary = md.str();
  return o;
}

StudyOutcome study_lemma42(const StudyConfig& cfg,
                           const std::vector<std::shared_ptr<const Mesh>>& meshes)
{
  StudyOutcome o;
  PotentialRatioTable t = potential_ratio_study(
      meshes, cfg.degree, cfg.samples, cfg.seed, cfg.resolution, cfg.dense_limit);
  const double mm = t.max_over_min();
  if (mm > 3.0)
    o = fail(o, "potential ratio max/min " + fmt("%.4g", mm) + " > 3");
  o.data = t.to_json();
  o.files["lemma42.csv"] = t.csv();
  o.summary = "## lemma42: surface potential stability\n\nmax/min " + fmt("%.4f", mm)
              + ", trend slope " + fmt("%.3e", trend_slope(t.maxima())) + "\n\n";
  return o;
}

} // namespace

StudyOutcome run_study(const std::string& study, const StudyConfig& cfg,
                       const std::vector<std::shared_ptr<const Mesh>>& meshes)
{
  StudyOutcome o;
  try
  {
    if (study == "lemma32")
      o = study_lemma32(cfg, meshes);
    else if (study == "rt_norm")
      o = study_norm(ExtensionKind::rt, cfg, meshes);
    else if (study == "nedelec_norm")
      o = study_norm(ExtensionKind::nedelec, cfg, meshes);
    else if (study == "exactness")
      o = study_exactness(cfg, meshes);
    else if (study == "corollaries")
      o = study_corollaries(cfg, meshes);
    else if (study == "lemma42")
      o = study_lemma42(cfg, meshes);
    else
      throw ConfigError("unknown study '" + study + "'");
  }
  catch (const ConfigError&)
  {
    throw;
  }
  catch (const std::exception& e)
  {
    o = fail(StudyOutcome{}, std::string("error: ") + e.what());
    o.summary = "## " + study + "\n\n" + o.message + "\n\n";
  }
  o.study = study;
  o.exit_code = o.passed ? 0 : study_exit_code(study);
  return o;
}

RunResult run(const StudyConfig& cfg)
{
  cfg.validate();
  const auto meshes = mesh_family(cfg.domain, cfg.family, cfg.levels);
  RunResult res;
  res.outcomes.resize(cfg.studies.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.studies.size(); i = next++)
      res.outcomes[i] = run_study(cfg.studies[i], cfg, meshes);
  };
  const int nthreads = std::min<int>(cfg.jobs, static_cast<int>(cfg.studies.size()));
  if (nthreads <= 1)
    worker();
  else
  {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back(worker);
    for (auto& t : pool)
      t.join();
  }

  std::ostringstream md;
  md << "# Study summary\n\n"
     << "domain " << cfg.domain << ", family " << to_string(cfg.family) << ", levels "
     << cfg.levels << ", k = " << cfg.degree << ", resolution " << cfg.resolution
     << ", seed " << cfg.seed << "\n\n";
  md << "## Mesh family\n\n```\n" << family_csv(meshes) << "```\n\n";
  nlohmann::json studies = nlohmann::json::object();
  for (const auto& o : res.outcomes)
  {
    md << o.summary << "Result: " << status(o) << "\n\n";
    studies[o.study] = {{"passed", o.passed},
                        {"message", o.message},
                        {"exit_code", o.exit_code},
                        {"data", o.data}};
    if (!o.passed and res.exit_code == 0)
      res.exit_code = o.exit_code;
  }
  res.report = {{"config", cfg.to_json()},
                {"studies", studies},
                {"exit_code", res.exit_code}};
  res.summary = md.str();

  if (!cfg.out.empty())
  {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out);
    auto write = [&](const std::string& name, const std::string& text) {
      std::ofstream f(fs::path(cfg.out) / name, std::ios::binary);
      if (!f)
        throw Error("cannot write " + (fs::path(cfg.out) / name).string());
      f << text;
    };
    write("mesh_family.csv", family_csv(meshes));
    for (const auto& o : res.outcomes)
      for (const auto& [name, text] : o.files)
        write(name, text);
    write("report.json", res.report.dump(2) + "\n");
    write("summary.md", res.summary);
  }
  return res;
}

} // namespace tracelift
