#include "tracelift/mesh.h"

#include <unordered_map>

namespace tracelift
{

namespace
{

struct Work
{
  std::array<int, 4> v; // bisection order
  int tag;
  int parent;
};

class Bisector
{
public:
  explicit Bisector(const Mesh& mesh) : _x(mesh.vertices())
  {
    const auto& bv = mesh.bisection_vertices();
    for (int c = 0; c < mesh.num_cells(); ++c)
      _cells.push_back({bv[c], mesh.tags()[c], c});
  }

  // Bisects the given cells once each, then restores conformity.
  void round(const std::vector<char>& mark)
  {
    std::vector<char> todo = mark;
    for (int pass = 0;; ++pass)
    {
      if (pass > 200)
        throw Error("bisection closure did not terminate");
      std::vector<Work> next;
      next.reserve(_cells.size() + 64);
      bool any = false;
      for (std::size_t c = 0; c < _cells.size(); ++c)
      {
        if (!todo[c])
        {
          next.push_back(_cells[c]);
          continue;
        }
        any = true;
        auto [a, b] = bisect(_cells[c]);
        next.push_back(a);
        next.push_back(b);
      }
      if (!any)
        return;
      _cells = std::move(next);
      todo.assign(_cells.size(), 0);
      for (std::size_t c = 0; c < _cells.size(); ++c)
      {
        const auto& v = _cells[c].v;
        for (auto [i, j] : kCellEdges)
          if (_mid.count(edge_key(v[i], v[j])))
          {
            todo[c] = 1;
            break;
          }
      }
    }
  }

  std::size_t size() const { return _cells.size(); }

  Mesh finish() const
  {
    std::vector<std::array<int, 4>> cells;
    std::vector<int> tags, parents;
    for (const auto& w : _cells)
    {
      cells.push_back(w.v);
      tags.push_back(w.tag);
      parents.push_back(w.parent);
    }
    auto bisection = cells;
    return Mesh(_x, std::move(cells), std::move(tags), std::move(parents),
                std::move(bisection));
  }

private:
  std::pair<Work, Work> bisect(const Work& w)
  {
    const int k = w.tag;
    const auto& x = w.v;
    const std::uint64_t key = edge_key(x[0], x[k]);
    int z;
    auto it = _mid.find(key);
    if (it != _mid.end())
      z = it->second;
    else
    {
      z = static_cast<int>(_x.size());
      _x.push_back(0.5 * (_x[x[0]] + _x[x[k]]));
      _mid.emplace(key, z);
    }
    const int t = k > 1 ? k - 1 : 3;
    Work a{{}, t, w.parent}, b{{}, t, w.parent};
    // a = (x0..x_{k-1}, z, x_{k+1}..x3), b = (x1..x_k, z, x_{k+1}..x3)
    for (int i = 0; i < k; ++i)
    {
      a.v[i] = x[i];
      b.v[i] = x[i + 1];
    }
    a.v[k] = z;
    b.v[k] = z;
    for (int i = k + 1; i < 4; ++i)
    {
      a.v[i] = x[i];
      b.v[i] = x[i];
    }
    return {a, b};
  }

  std::vector<Vec3> _x;
  std::vector<Work> _cells;
  // Split edges stay in the map; an edge of a live cell found here is hanging.
  std::unordered_map<std::uint64_t, int> _mid;
};

} // namespace

Mesh refine(const Mesh& mesh, RefineMode mode, const std::set<int>& marked)
{
  Bisector b(mesh);
  if (mode == RefineMode::uniform)
  {
    for (int r = 0; r < 3; ++r)
      b.round(std::vector<char>(b.size(), 1));
  }
  else
  {
    if (marked.empty())
      throw Error("bisection refinement requires marked cells");
    std::vector<char> mark(b.size(), 0);
    for (int c : marked)
    {
      if (c < 0 or c >= mesh.num_cells())
        throw Error("marked cell out of range: " + std::to_string(c));
      mark[c] = 1;
    }
    b.round(mark);
  }
  return b.finish();
}

} // namespace tracelift
