#include "tracelift/mesh.h"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace tracelift
{

namespace
{

[[noreturn]] void parse_error(const std::string& msg)
{
  throw MeshError(MeshError::Kind::Parse, "mesh parse error: " + msg);
}

// Orders each cell so that its longest edge (ties broken by vertex ids)
// joins local vertices 0 and 3; this is the initial refinement edge.
std::vector<std::array<int, 4>>
longest_edge_labels(const std::vector<Vec3>& x,
                    const std::vector<std::array<int, 4>>& cells)
{
  std::vector<std::array<int, 4>> out;
  out.reserve(cells.size());
  for (const auto& c : cells)
  {
    std::array<int, 4> v = c;
    std::sort(v.begin(), v.end());
    int ba = 0, bb = 1;
    double best = -1.0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
      {
        const double l = (x[v[a]] - x[v[b]]).norm();
        if (l > best * (1.0 + 1e-12))
        {
          best = l;
          ba = a;
          bb = b;
        }
      }
    std::array<int, 4> r;
    r[0] = v[ba];
    r[3] = v[bb];
    for (int j = 0, m = 1; j < 4; ++j)
      if (j != ba and j != bb)
        r[m++] = v[j];
    out.push_back(r);
  }
  return out;
}

Mesh make_loaded(std::vector<Vec3> x, std::vector<std::array<int, 4>> cells)
{
  for (auto& c : cells)
    for (int v : c)
      if (v < 0 or v >= static_cast<int>(x.size()))
        parse_error("vertex index " + std::to_string(v) + " out of range");
  auto labels = longest_edge_labels(x, cells);
  return Mesh(std::move(x), std::move(cells), {}, {}, std::move(labels));
}

Mesh load_json(std::istream& in)
{
  nlohmann::json j;
  try
  {
    in >> j;
  }
  catch (const nlohmann::json::exception& e)
  {
    parse_error(e.what());
  }
  if (!j.is_object() or !j.contains("vertices") or !j.contains("cells"))
    parse_error("expected object with \"vertices\" and \"cells\"");
  std::vector<Vec3> x;
  std::vector<std::array<int, 4>> cells;
  try
  {
    for (const auto& v : j["vertices"])
    {
      if (v.size() != 3)
        parse_error("vertex must have 3 coordinates");
      x.emplace_back(v[0].get<double>(), v[1].get<double>(),
                     v[2].get<double>());
    }
    for (const auto& c : j["cells"])
    {
      if (c.size() != 4)
        throw MeshError(MeshError::Kind::NonTetCell,
                        "non-tet cell with " + std::to_string(c.size())
                            + " vertices");
      cells.push_back({c[0].get<int>(), c[1].get<int>(), c[2].get<int>(),
                       c[3].get<int>()});
    }
  }
  catch (const nlohmann::json::exception& e)
  {
    parse_error(e.what());
  }
  return make_loaded(std::move(x), std::move(cells));
}

Mesh load_gmsh(std::istream& in)
{
  std::string line;
  std::vector<Vec3> x;
  std::unordered_map<long, int> node_index;
  std::vector<std::array<int, 4>> cells;
  bool have_format = false, have_nodes = false, have_elements = false;

  auto expect_end = [&](const std::string& tag) {
    if (!std::getline(in, line) or line.rfind(tag, 0) != 0)
      parse_error("missing " + tag);
  };

  while (std::getline(in, line))
  {
    if (!line.empty() and line.back() == '\r')
      line.pop_back();
    if (line == "$MeshFormat")
    {
      if (!std::getline(in, line))
        parse_error("truncated $MeshFormat");
      std::istringstream ss(line);
      double version = 0;
      int ftype = -1;
      ss >> version >> ftype;
      if (!ss or version < 2.0 or version >= 3.0)
        parse_error("unsupported MSH version (need 2.x ASCII)");
      if (ftype != 0)
        parse_error("binary MSH is not supported");
      expect_end("$EndMeshFormat");
      have_format = true;
    }
    else if (line == "$Nodes")
    {
      long n = 0;
      if (!(in >> n) or n < 0)
        parse_error("bad node count");
      x.reserve(n);
      for (long i = 0; i < n; ++i)
      {
        long id;
        double a, b, c;
        if (!(in >> id >> a >> b >> c))
          parse_error("bad node record " + std::to_string(i));
        node_index[id] = static_cast<int>(x.size());
        x.emplace_back(a, b, c);
      }
      std::getline(in, line);
      expect_end("$EndNodes");
      have_nodes = true;
    }
    else if (line == "$Elements")
    {
      long n = 0;
      if (!(in >> n) or n < 0)
        parse_error("bad element count");
      std::getline(in, line);
      for (long i = 0; i < n; ++i)
      {
        if (!std::getline(in, line))
          parse_error("truncated $Elements");
        std::istringstream ss(line);
        long id;
        int type, ntags;
        if (!(ss >> id >> type >> ntags))
          parse_error("bad element record " + std::to_string(i));
        for (int t = 0; t < ntags; ++t)
        {
          long tag;
          if (!(ss >> tag))
            parse_error("bad element tags");
        }
        if (type == 15 or type == 1 or type == 2)
          continue; // points, lines, triangles: not part of the volume mesh
        if (type != 4)
          throw MeshError(MeshError::Kind::NonTetCell,
                          "non-tet cell (gmsh element type "
                              + std::to_string(type) + ")");
        std::array<int, 4> c;
        for (int k = 0; k < 4; ++k)
        {
          long node;
          if (!(ss >> node))
            parse_error("bad tetrahedron record");
          auto it = node_index.find(node);
          if (it == node_index.end())
            parse_error("unknown node id " + std::to_string(node));
          c[k] = it->second;
        }
        cells.push_back(c);
      }
      expect_end("$EndElements");
      have_elements = true;
    }
  }
  if (!have_format or !have_nodes or !have_elements)
    parse_error("missing $MeshFormat, $Nodes or $Elements section");
  return make_loaded(std::move(x), std::move(cells));
}

} // namespace

Mesh load_mesh(std::istream& in, MeshFormat format)
{
  switch (format)
  {
  case MeshFormat::gmsh22:
    return load_gmsh(in);
  case MeshFormat::internal_json:
    return load_json(in);
  }
  throw Error("unknown mesh format");
}

Mesh load_mesh_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw MeshError(MeshError::Kind::Io, "cannot open mesh file " + path);
  const bool json = path.size() >= 5 and path.substr(path.size() - 5) == ".json";
  return load_mesh(in, json ? MeshFormat::internal_json : MeshFormat::gmsh22);
}

} // namespace tracelift
