#pragma once

#include <Eigen/Core>

#include <vector>

namespace tracelift::quadrature
{

/// Quadrature rule on a simplex with N vertices. Points are barycentric
/// coordinates; weights sum to one (multiply by the simplex measure).
template <int N>
struct Rule
{
  std::vector<Eigen::Matrix<double, N, 1>> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

using LineRule = Rule<2>;
using TriangleRule = Rule<3>;
using TetRule = Rule<4>;

/// Gauss-Legendre nodes and weights on [0, 1] with n points.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

/// Rules exact for polynomials of total degree <= degree. Collapsed
/// (Duffy) tensor products of Gauss-Legendre rules; cached per degree.
const LineRule& line(int degree);
const TriangleRule& triangle(int degree);
const TetRule& tetrahedron(int degree);

} // namespace tracelift::quadrature
