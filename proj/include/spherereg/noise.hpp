#pragma once

#include <cstdint>
#include <string>

#include "spherereg/geometry.hpp"

namespace spherereg {

enum class NoiseKind { GaussianClipped, Uniform, ReplaceOutliers, RangeNoise };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::GaussianClipped;
  double sigma = 0.05;     // std for gaussian/outlier/range, half width for uniform
  double clip = 0.05;      // gaussian_clipped only
  double fraction = 0.05;  // replace_outliers only
  bool has_origin = false; // range_noise: otherwise the cloud's sensor origin
  Vec3 origin = Vec3::Zero();
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_string() const;
};

/// "kind=gaussian_clipped,sigma=0.05,clip=0.05,seed=7"; unspecified fields
/// keep their defaults. origin is given as "ox,oy,oz" keys.
NoiseSpec parse_noise_spec(const std::string& text);

/// Per-coordinate N(0, sigma^2), each component clamped to [-clip, clip].
PointCloud gaussian_clipped(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed);
/// Per-coordinate U(-half_width, half_width).
PointCloud uniform_noise(const PointCloud& cloud, double half_width, std::uint64_t seed);
/// floor(fraction * n) distinct points replaced by N(0, sigma^2) triples
/// around the cloud centroid.
PointCloud replace_outliers(const PointCloud& cloud, double fraction, double sigma, std::uint64_t seed);
/// Each point moved along the ray from `origin` by N(0, sigma^2) clipped to
/// +-3 sigma. An approximation of depth-map noise.
PointCloud range_noise(const PointCloud& cloud, const Vec3& origin, double sigma, std::uint64_t seed);

PointCloud apply_noise(const PointCloud& cloud, const NoiseSpec& spec);

}  // namespace spherereg
