#pragma once

#include <array>
#include <string>
#include <vector>

#include "spherereg/geometry.hpp"
#include "spherereg/io.hpp"
#include "spherereg/lrf.hpp"
#include "spherereg/scnn.hpp"
#include "spherereg/spherevox.hpp"

namespace spherereg {

enum class VoxelMode { Interpolated, Hard };

std::string to_string(VoxelMode mode);
VoxelMode parse_voxel_mode(const std::string& name);

/// Everything between a raw patch and the network input.
struct EncoderConfig {
  VoxelParams voxel;
  bool msf = false;
  std::array<double, 3> msf_fractions{1.0 / 3.0, 2.0 / 3.0, 1.0};
  VoxelMode mode = VoxelMode::Interpolated;
  InterpOptions interp;
  // Rescale each channel to unit mean voxel value so inputs do not depend
  // on sampling density.
  bool normalize_input = true;

  Tensor4d::Shape grid_shape() const;
};

struct EncodedPatch {
  Tensor4d grid;
  bool fallback_frame = false;  // LRF was degenerate; world axes used
};

/// LRF -> local coordinates -> voxelization (+ multiscale fusion).
EncodedPatch encode_patch(const Patch& patch, const EncoderConfig& config);

/// Grid input for the network from already-local coordinates.
Tensor4d voxelize(const Patch& local_patch, const EncoderConfig& config);

/// Encodes the radius-R patch around each keypoint.
std::vector<EncodedPatch> encode_keypoints(const RadiusIndex& index, const Points& keypoints,
                                           const EncoderConfig& config, int threads);

/// Descriptors for every keypoint of `cloud`.
DescriptorSet describe_keypoints(const PointCloud& cloud, const Points& keypoints, const EncoderConfig& config,
                                 const NetworkWeights& weights, int threads);

/// Network forward over a batch of encoded patches, one column per patch.
Eigen::MatrixXd forward_batch(const std::vector<EncodedPatch>& patches, const NetworkWeights& weights,
                              int threads);

}  // namespace spherereg
