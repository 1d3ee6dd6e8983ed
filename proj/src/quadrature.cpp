#include "tracelift/quadrature.h"
#include "tracelift/common.h"

#include <cmath>
#include <mutex>
#include <numbers>

namespace tracelift::quadrature
{

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w)
{
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
  {
    // Newton on P_n starting from the Chebyshev-like guess
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it)
    {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k)
      {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1)
      {
        p1 = z;
        p0 = 1.0;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16)
        break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

namespace
{

constexpr int kMaxDegree = 40;

template <typename RuleT, typename Build>
const RuleT& cached(int degree, std::vector<RuleT>& cache, std::once_flag& flag,
                    Build build)
{
  if (degree < 0)
    degree = 0;
  if (degree > kMaxDegree)
    throw Error("quadrature degree too high: " + std::to_string(degree));
  std::call_once(flag, [&] {
    cache.resize(kMaxDegree + 1);
    for (int d = 0; d <= kMaxDegree; ++d)
      cache[d] = build(d);
  });
  return cache[degree];
}

LineRule build_line(int degree)
{
  std::vector<double> x, w;
  gauss_legendre(degree / 2 + 1, x, w);
  LineRule r;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    r.points.emplace_back(1.0 - x[i], x[i]);
    r.weights.push_back(w[i]);
  }
  return r;
}

TriangleRule build_triangle(int degree)
{
  std::vector<double> x, w;
  gauss_legendre((degree + 3) / 2, x, w);
  TriangleRule r;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
    {
      const double l1 = x[i];
      const double l2 = x[j] * (1.0 - x[i]);
      r.points.emplace_back(1.0 - l1 - l2, l1, l2);
      r.weights.push_back(2.0 * w[i] * w[j] * (1.0 - x[i]));
    }
  return r;
}

TetRule build_tet(int degree)
{
  std::vector<double> x, w;
  gauss_legendre((degree + 4) / 2, x, w);
  TetRule r;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      for (std::size_t k = 0; k < x.size(); ++k)
      {
        const double l1 = x[i];
        const double l2 = x[j] * (1.0 - x[i]);
        const double l3 = x[k] * (1.0 - x[i]) * (1.0 - x[j]);
        Eigen::Vector4d p(1.0 - l1 - l2 - l3, l1, l2, l3);
        r.points.push_back(p);
        r.weights.push_back(6.0 * w[i] * w[j] * w[k] * (1.0 - x[i])
                            * (1.0 - x[i]) * (1.0 - x[j]));
      }
  return r;
}

} // namespace

const LineRule& line(int degree)
{
  static std::vector<LineRule> cache;
  static std::once_flag flag;
  return cached(degree, cache, flag, build_line);
}

const TriangleRule& triangle(int degree)
{
  static std::vector<TriangleRule> cache;
  static std::once_flag flag;
  return cached(degree, cache, flag, build_triangle);
}

const TetRule& tetrahedron(int degree)
{
  static std::vector<TetRule> cache;
  static std::once_flag flag;
  return cached(degree, cache, flag, build_tet);
}

} // namespace tracelift::quadrature
