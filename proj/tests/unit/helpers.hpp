#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "spherereg/geometry.hpp"
#include "spherereg/rng.hpp"

namespace testing {

using namespace spherereg;

inline Points random_points(Eigen::Index n, std::uint64_t seed, double scale = 1.0) {
  Rng gen = make_rng(seed, 99);
  Points p(3, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) p(a, i) = scale * (2.0 * uniform01(gen) - 1.0);
  return p;
}

// Bumpy, asymmetric surface patch around the origin: every LRF decision has
// a clear margin.
inline Patch bumpy_patch(std::uint64_t seed, Eigen::Index n = 300, double radius = 1.0) {
  Rng gen = make_rng(seed, 7);
  Patch patch;
  patch.radius = radius;
  patch.neighbors.resize(3, n);
  Eigen::Index k = 0;
  while (k < n) {
    const double x = radius * (2.0 * uniform01(gen) - 1.0), y = radius * (2.0 * uniform01(gen) - 1.0);
    const double z = 0.25 * radius * std::exp(-4.0 * ((x - 0.3) * (x - 0.3) + y * y)) + 0.05 * x * y;
    const Vec3 p(x, y, z);
    if (p.norm() >= radius || p.norm() == 0.0) continue;
    patch.neighbors.col(k++) = p;
  }
  return patch;
}

inline RigidTransformd random_transform(std::uint64_t seed, double translation = 1.0) {
  Rng gen = make_rng(seed, 5);
  RigidTransformd t;
  t.rotation = random_rotation(gen);
  for (int a = 0; a < 3; ++a) t.translation(a) = translation * (2.0 * uniform01(gen) - 1.0);
  return t;
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "spherereg_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testing
