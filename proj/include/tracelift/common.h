#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tracelift
{

using Vec3 = Eigen::Vector3d;
using Bary = Eigen::Vector4d;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t edge_key(int a, int b)
{
  if (a > b)
    std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

inline std::uint64_t face_key(std::array<int, 3> v)
{
  // callers pass sorted triples; 21 bits per index
  return (static_cast<std::uint64_t>(v[0]) << 42)
         | (static_cast<std::uint64_t>(v[1]) << 21)
         | static_cast<std::uint64_t>(v[2]);
}

} // namespace tracelift
