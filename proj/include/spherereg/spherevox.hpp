#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include "spherereg/geometry.hpp"
#include "spherereg/tensor.hpp"

namespace spherereg {

/// Uniform (radius, elevation, azimuth) partition of the ball of radius R.
struct VoxelParams {
  int radial_bins = 15;     // N
  int elevation_bins = 20;  // M
  int azimuth_bins = 40;    // K
  double radius = 0.3;      // R

  void validate() const;
  double radial_width() const { return radius / radial_bins; }
  double elevation_width() const;
  double azimuth_width() const;
};

template <typename Scalar>
struct SphericalCoord {
  Scalar r = 0;      // >= 0
  Scalar theta = 0;  // [0, pi]
  Scalar phi = 0;    // [0, 2 pi)
};

/// r = |p|, theta = acos(z / r), phi = atan2(y, x) wrapped into [0, 2 pi).
template <typename Derived>
SphericalCoord<typename Derived::Scalar> spherical_coords(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  const Scalar two_pi = Scalar(2) * Scalar(EIGEN_PI);
  SphericalCoord<Scalar> c;
  c.r = p.norm();
  if (c.r > Scalar(0)) {
    const Scalar cz = std::clamp(p(2) / c.r, Scalar(-1), Scalar(1));
    c.theta = std::acos(cz);
  }
  if (p(0) != Scalar(0) || p(1) != Scalar(0)) {
    Scalar phi = std::atan2(p(1), p(0));
    if (phi < Scalar(0)) phi += two_pi;
    if (phi >= two_pi) phi = Scalar(0);
    c.phi = phi;
  }
  return c;
}

/// Channel-stacked voxel histogram, shape (C, N', M, K).
struct FeatureGrid {
  Tensor4d values;
  std::vector<VoxelParams> scales;  // one entry per channel
  Eigen::Index dropped = 0;         // points outside the outer radius
};

/// Zero-based (n, m, k) bin of a coordinate; the upper edges r = R and
/// theta = pi belong to the last bin.
std::array<int, 3> hard_bin(const SphericalCoord<double>& c, const VoxelParams& params);

/// One histogram count per in-range point. Points with r > R are dropped
/// and counted in FeatureGrid::dropped.
FeatureGrid voxelize_hard(const Patch& local_patch, const VoxelParams& params);

struct AxisWeight {
  int region = 0;  // zero-based
  double weight = 0.0;
};

struct InterpWeights {
  std::vector<AxisWeight> radial, elevation, azimuth;
};

struct InterpOptions {
  // Measure azimuth distance to region centerlines modulo 2 pi. Disabling it
  // gives the unwrapped distance, which breaks shift equivariance at phi = 0.
  bool wrap_azimuth = true;
};

/// Per-axis soft-assignment weights to neighboring region centerlines
/// (at most two nonzero per axis). Radial weights clamp to 1 in the
/// innermost half bin; elevation weights clamp to 1 near both poles.
/// Throws ConfigError when c.r > R.
InterpWeights interp_weights(const SphericalCoord<double>& c, const VoxelParams& params,
                             const InterpOptions& options = {});

/// Each point votes w_r * w_theta * w_phi into up to 2x2x2 voxels.
FeatureGrid voxelize_interp(const Patch& local_patch, const VoxelParams& params,
                            const InterpOptions& options = {});

/// Interpolated grids at outer radii f_s * R with N/3 radial bins each,
/// stacked into 3 channels.
FeatureGrid msf_fuse(const Patch& local_patch, const VoxelParams& params,
                     const std::array<double, 3>& radius_fractions = {1.0 / 3.0, 2.0 / 3.0, 1.0},
                     const InterpOptions& options = {});

/// Debug dump: "SVOX", u32 C, N, M, K, then float32 values in C-major order.
void save_feature_grid(const FeatureGrid& grid, const std::filesystem::path& path);
Tensor4d load_feature_grid(const std::filesystem::path& path);

}  // namespace spherereg
