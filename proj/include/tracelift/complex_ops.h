#pragma once

#include "tracelift/fe_space.h"
#include "tracelift/linalg.h"

#include <json.hpp>

#include <string>
#include <vector>

namespace tracelift
{

/// Linear map between two spaces; matrix is (to.dim x from.dim).
struct SparseOperator
{
  SpacePtr from;
  SpacePtr to;
  SpMat matrix;
  std::string kind;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return matrix * x; }
  FEFunction apply(const FEFunction& u) const;
};

enum class DiffKind
{
  grad,      // Lagrange -> Nedelec1
  curl,      // Nedelec1 -> RaviartThomas
  div,       // RaviartThomas -> DG
  surf_div,  // SurfaceRT -> SurfaceDG
  surf_curl  // SurfaceLagrange -> SurfaceRT, curl_G phi = grad_G phi x n
};

enum class TraceKind
{
  normal,     // RaviartThomas -> SurfaceDG, v.n
  tangential, // Nedelec1 -> SurfaceRT, v x n
  scalar      // Lagrange -> SurfaceLagrange, restriction
};

/// Coefficient-level differential: codomain DOF functionals applied to
/// differentiated domain basis functions.
SparseOperator diff_operator(DiffKind kind, SpacePtr from, SpacePtr to);

SparseOperator trace_operator(TraceKind kind, SpacePtr from, SpacePtr to);

/// One slot of a complex: kernel of the outgoing map versus range of the
/// incoming one.
struct ExactnessSlot
{
  std::string space;
  int dim = 0;
  int dim_kernel = 0;
  int dim_range_in = 0;
  int defect = 0;   // dim_kernel - dim_range_in
  int expected = 0; // cohomology of a contractible domain
  int reduced_defect() const { return defect - expected; }
};

struct ExactnessReport
{
  int k = 0;
  int num_cells = 0;
  std::vector<ExactnessSlot> full;
  std::vector<ExactnessSlot> essential;
  double max_complex_entry = 0.0; // max |curl grad|, |div curl|
  // the same, divided by max|A| * max|B| of the two factors
  double max_complex_entry_rel = 0.0;

  /// True iff every reduced defect is zero.
  bool exact() const;
  nlohmann::json to_json() const;
};

/// Ranks of grad/curl/div for the full complex and for the subcomplex with
/// vanishing traces.
ExactnessReport verify_exactness(std::shared_ptr<const Mesh> mesh, int k);

} // namespace tracelift
