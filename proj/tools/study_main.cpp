#include "tracelift/study.h"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

extern "C" void openblas_set_num_threads(int);

using namespace tracelift;

namespace
{

struct Overrides
{
  std::optional<unsigned> seed;
  std::optional<std::string> out;
  std::optional<int> dense_limit;
  std::optional<int> levels;
  std::optional<int> degree;

  void add(CLI::App* app)
  {
    app->add_option("--seed", seed, "RNG seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--dense-limit", dense_limit, "largest dense boundary Gram");
    app->add_option("--levels", levels, "number of mesh levels");
    app->add_option("--degree", degree, "polynomial index k (0 or 1)");
  }

  void apply(StudyConfig& c) const
  {
    if (seed)
      c.seed = *seed;
    if (out)
      c.out = *out;
    if (dense_limit)
      c.dense_limit = *dense_limit;
    if (levels)
      c.levels = *levels;
    if (degree)
      c.degree = *degree;
  }
};

int report(const RunResult& r)
{
  for (const auto& o : r.outcomes)
    std::cout << o.study << ": " << (o.passed ? "PASS" : "FAIL " + o.message) << "\n";
  return r.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
  // single-threaded BLAS keeps reports byte-identical
  openblas_set_num_threads(1);

  CLI::App app{"tracelift experiment driver"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run the studies of a JSON config");
  std::string config_path;
  run_cmd->add_option("config", config_path, "config file")->required();
  Overrides run_over;
  run_over.add(run_cmd);

  auto* fam_cmd = app.add_subcommand("mesh-family", "print a mesh family table");
  std::string domain = "cube", kind = "uniform";
  int fam_levels = 4;
  std::string fam_out;
  fam_cmd->add_option("--domain", domain, "cube or lprism");
  fam_cmd->add_option("--kind", kind, "uniform, boundary_graded or vertex_graded");
  fam_cmd->add_option("--levels", fam_levels, "number of levels");
  fam_cmd->add_option("--out", fam_out, "write mesh_family.csv here");

  auto* ver_cmd = app.add_subcommand("verify", "run one study with default settings");
  std::string which;
  ver_cmd->add_option("which", which, "study name")->required();
  std::string ver_family = "uniform", ver_domain = "cube";
  ver_cmd->add_option("--family", ver_family, "mesh family");
  ver_cmd->add_option("--domain", ver_domain, "cube or lprism");
  Overrides ver_over;
  ver_over.add(ver_cmd);

  CLI11_PARSE(app, argc, argv);

  try
  {
    if (*run_cmd)
    {
      std::ifstream f(config_path);
      if (!f)
        throw ConfigError("cannot read config " + config_path);
      nlohmann::json j;
      try
      {
        j = nlohmann::json::parse(f);
      }
      catch (const nlohmann::json::parse_error& e)
      {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
      StudyConfig cfg = StudyConfig::from_json(j);
      run_over.apply(cfg);
      return report(run(cfg));
    }
    if (*fam_cmd)
    {
      const auto meshes = mesh_family(domain, mesh_family_from_string(kind), fam_levels);
      const std::string csv = family_csv(meshes);
      std::cout << csv;
      if (!fam_out.empty())
      {
        std::filesystem::create_directories(fam_out);
        std::ofstream(std::filesystem::path(fam_out) / "mesh_family.csv") << csv;
      }
      return 0;
    }
    StudyConfig cfg;
    cfg.studies = {which};
    cfg.domain = ver_domain;
    cfg.family = mesh_family_from_string(ver_family);
    ver_over.apply(cfg);
    return report(run(cfg));
  }
  catch (const ConfigError& e)
  {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
