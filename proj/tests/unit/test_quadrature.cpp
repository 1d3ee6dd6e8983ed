#include <doctest.h>

#include "tracelift/common.h"
#include "tracelift/quadrature.h"

#include <cmath>

using namespace tracelift;

namespace
{

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Integral of prod lambda_i^a_i over the unit-measure simplex of dimension d:
// d! prod a_i! / (d + sum a_i)!
double exact(const std::vector<int>& a)
{
  const int d = static_cast<int>(a.size()) - 1;
  double num = factorial(d);
  int s = 0;
  for (int ai : a)
  {
    num *= factorial(ai);
    s += ai;
  }
  return num / factorial(d + s);
}

} // namespace

TEST_CASE("gauss legendre")
{
  std::vector<double> x, w;
  quadrature::gauss_legendre(5, x, w);
  double s = 0, m9 = 0;
  for (int i = 0; i < 5; ++i)
  {
    s += w[i];
    m9 += w[i] * std::pow(x[i], 9);
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m9 == doctest::Approx(0.1).epsilon(1e-13));
}

TEST_CASE("simplex rules are exact to their degree")
{
  for (int deg = 0; deg <= 12; ++deg)
  {
    const auto& L = quadrature::line(deg);
    const auto& T = quadrature::triangle(deg);
    const auto& K = quadrature::tetrahedron(deg);
    for (int a = 0; a <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b)
      {
        double sl = 0;
        for (std::size_t q = 0; q < L.size(); ++q)
          sl += L.weights[q] * std::pow(L.points[q][0], a) * std::pow(L.points[q][1], b);
        CHECK(sl == doctest::Approx(exact({a, b})).epsilon(1e-12));
        for (int c = 0; a + b + c <= deg; ++c)
        {
          double st = 0;
          for (std::size_t q = 0; q < T.size(); ++q)
            st += T.weights[q] * std::pow(T.points[q][0], a)
                  * std::pow(T.points[q][1], b) * std::pow(T.points[q][2], c);
          CHECK(st == doctest::Approx(exact({a, b, c})).epsilon(1e-12));
          for (int d = 0; a + b + c + d <= deg; ++d)
          {
            double sk = 0;
            for (std::size_t q = 0; q < K.size(); ++q)
              sk += K.weights[q] * std::pow(K.points[q][0], a)
                    * std::pow(K.points[q][1], b) * std::pow(K.points[q][2], c)
                    * std::pow(K.points[q][3], d);
            CHECK(sk == doctest::Approx(exact({a, b, c, d})).epsilon(1e-12));
          }
        }
      }
  }
  CHECK_THROWS_AS(quadrature::tetrahedron(100), tracelift::Error);
}
