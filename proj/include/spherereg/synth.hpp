#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "spherereg/geometry.hpp"

namespace spherereg {

/// Cluttered room corner in [0, extent]^2 x [0, extent/3]: floor, two walls,
/// and random boxes, cylinders and spheres, sampled uniformly by area.
PointCloud synth_scene(std::uint64_t seed, Eigen::Index point_count, double extent = 3.0);

struct SynthPair {
  PointCloud p;
  PointCloud q;              // T_gt applied to its scene points
  RigidTransformd t_gt;      // maps P coordinates into Q coordinates
  std::vector<std::pair<Eigen::Index, Eigen::Index>> correspondences;
  std::uint64_t seed = 0;
};

struct SynthOptions {
  Eigen::Index points_per_cloud = 5000;
  double overlap = 0.7;       // fraction of P's points also present in Q
  double noise_sigma = 0.0;   // Noise 1 on both clouds, clipped at sigma
  double extent = 3.0;
  double max_translation = 1.0;
  double tau1 = 0.1;          // correspondence distance
};

/// One scene split into two overlapping clouds along a random horizontal
/// direction. Both keep scene order, so overlap 1 without noise gives the
/// identity correspondence.
SynthPair synth_pair(std::uint64_t seed, const SynthOptions& options);

std::vector<SynthPair> synth_pair_dataset(std::uint64_t seed, int scene_count, const SynthOptions& options);

}  // namespace spherereg
