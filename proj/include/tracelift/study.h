#pragma once

#include "tracelift/model_problems.h"

#include <json.hpp>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace tracelift
{

enum class MeshFamily
{
  uniform,
  boundary_graded, // every cell touching the boundary refined each level
  vertex_graded    // cells touching one boundary vertex refined each level
};

std::string to_string(MeshFamily f);
MeshFamily mesh_family_from_string(const std::string& s);

/// Nested meshes on "cube" or "lprism", levels 0 .. levels-1. Graded
/// levels apply three rounds of bisection to the marked cells (one full
/// subdivision of each marked tetrahedron). The vertex-graded family starts
/// from one uniform refinement of the coarse mesh.
std::vector<std::shared_ptr<const Mesh>>
mesh_family(const std::string& domain, MeshFamily kind, int levels);

/// level, cells, boundary_triangles, h_min, h_max, grading, shape_reg,
/// max_boundary_diameter.
std::string family_csv(const std::vector<std::shared_ptr<const Mesh>>& meshes);

class ConfigError : public Error
{
public:
  using Error::Error;
};

struct StudyConfig
{
  std::string domain = "cube";
  MeshFamily family = MeshFamily::uniform;
  int levels = 4;
  int degree = 0;
  int resolution = 1;
  std::vector<std::string> studies;
  unsigned seed = 1234;
  std::string out;
  int dense_limit = 2000;
  int samples = 50;
  std::vector<double> eps{0.0, 1.0, 64.0, 128.0, 256.0};
  double eps_dominant = 64.0;
  int jobs = 1;

  /// Unknown keys and bad values raise ConfigError.
  static StudyConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Names accepted in StudyConfig::studies.
const std::vector<std::string>& study_names();

struct InverseInequalityRow
{
  int level = 0;
  int ndof = 0;
  double h_min = 0.0;
  double h_max = 0.0;
  double max_sampled = 0.0; // random mean-free data
  double max_bump = 0.0;    // single-face data
  double exact_max = -1.0;  // generalized eigenvalue; -1 above dense limit
};

struct InverseInequalityTable
{
  std::vector<InverseInequalityRow> rows;

  /// Per-level maximum (exact if available, else sampled).
  std::vector<double> maxima() const;
  double max_over_min() const;
  std::string csv() const;
  nlohmann::json to_json() const;
};

/// sum_F h_F |g|_{L2(F)}^2 / |g|_{-1/2}^2 over sampled g in M_h.
InverseInequalityTable
verify_inverse_inequality(const std::vector<std::shared_ptr<const Mesh>>& meshes,
                          int k, int samples, unsigned seed, int r = 1,
                          int dense_limit = 2000);

struct PotentialRatioRow
{
  int level = 0;
  int ndof = 0;
  double max_sampled = 0.0;
  double exact_max = -1.0;
  double exact_min = -1.0;
};

struct PotentialRatioTable
{
  std::vector<PotentialRatioRow> rows;

  std::vector<double> maxima() const;
  double max_over_min() const;
  std::string csv() const;
  nlohmann::json to_json() const;
};

/// |phi|_{H^{1/2}/R} / |curl_G phi| in the tangential dual norm for
/// sampled phi in P_h. The quotient norm minimizes the full Slobodetskij
/// norm over additive constants.
PotentialRatioTable
potential_ratio_study(const std::vector<std::shared_ptr<const Mesh>>& meshes,
                      int k, int samples, unsigned seed, int r = 1,
                      int dense_limit = 2000);

struct StudyOutcome
{
  std::string study;
  bool passed = true;
  std::string message; // failing level and criterion
  int exit_code = 0;
  nlohmann::json data;
  std::map<std::string, std::string> files; // file name -> content
  std::string summary;                      // Markdown section
};

struct RunResult
{
  std::vector<StudyOutcome> outcomes;
  int exit_code = 0;
  nlohmann::json report;
  std::string summary;
};

/// Exit code of a failing study.
int study_exit_code(const std::string& study);

StudyOutcome run_study(const std::string& study, const StudyConfig& cfg,
                       const std::vector<std::shared_ptr<const Mesh>>& meshes);

/// Runs the requested studies and writes CSV files, report.json and
/// summary.md to cfg.out (nothing is written when cfg.out is empty).
RunResult run(const StudyConfig& cfg);

} // namespace tracelift
