#include "spherereg/encoder.hpp"

#include "spherereg/parallel.hpp"

namespace spherereg {

std::string to_string(VoxelMode mode) { return mode == VoxelMode::Interpolated ? "interp" : "hard"; }

VoxelMode parse_voxel_mode(const std::string& name) {
  if (name == "interp" || name == "interpolated") return VoxelMode::Interpolated;
  if (name == "hard") return VoxelMode::Hard;
  throw ConfigError("unknown voxelization mode '" + name + "'");
}

Tensor4d::Shape EncoderConfig::grid_shape() const {
  return {msf ? 3 : 1, msf ? voxel.radial_bins / 3 : voxel.radial_bins, voxel.elevation_bins, voxel.azimuth_bins};
}

Tensor4d voxelize(const Patch& local_patch, const EncoderConfig& config) {
  Tensor4d grid;
  if (config.msf) {
    if (config.mode == VoxelMode::Interpolated) {
      grid = msf_fuse(local_patch, config.voxel, config.msf_fractions, config.interp).values;
    } else {
      if (config.voxel.radial_bins % 3 != 0) throw ConfigError("multiscale fusion needs N divisible by 3");
      grid = Tensor4d(config.grid_shape());
      for (int s = 0; s < 3; ++s) {
        VoxelParams scale = config.voxel;
        scale.radial_bins /= 3;
        scale.radius *= config.msf_fractions[static_cast<std::size_t>(s)];
        const Tensor4d g = voxelize_hard(local_patch, scale).values;
        grid.data().segment(s * g.size(), g.size()) = g.data();
      }
    }
  } else {
    grid = config.mode == VoxelMode::Interpolated ? voxelize_interp(local_patch, config.voxel, config.interp).values
                                                  : voxelize_hard(local_patch, config.voxel).values;
  }
  if (config.normalize_input) {
    auto rows = grid.channel_rows();
    for (Eigen::Index c = 0; c < rows.rows(); ++c) {
      const double mass = rows.row(c).sum();
      if (mass > 0.0) rows.row(c) *= static_cast<double>(rows.cols()) / mass;
    }
  }
  return grid;
}

EncodedPatch encode_patch(const Patch& patch, const EncoderConfig& config) {
  EncodedPatch out;
  LocalFrame frame;
  try {
    frame = build_lrf(patch);
  } catch (const DegenerateError&) {
    frame = fallback_frame(patch.center);
    out.fallback_frame = true;
  }
  out.grid = voxelize(to_local(patch, frame), config);
  return out;
}

std::vector<EncodedPatch> encode_keypoints(const RadiusIndex& index, const Points& keypoints,
                                           const EncoderConfig& config, int threads) {
  std::vector<EncodedPatch> out(static_cast<std::size_t>(keypoints.cols()));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const Vec3 center = keypoints.col(static_cast<Eigen::Index>(i));
    out[i] = encode_patch(radius_neighbors(index, center, config.voxel.radius), config);
  });
  return out;
}

Eigen::MatrixXd forward_batch(const std::vector<EncodedPatch>& patches, const NetworkWeights& weights,
                              int threads) {
  Eigen::MatrixXd out(weights.arch.descriptor_dim, static_cast<Eigen::Index>(patches.size()));
  parallel_for(patches.size(), threads, [&](std::size_t i) {
    out.col(static_cast<Eigen::Index>(i)) = forward(patches[i].grid, weights);
  });
  return out;
}

DescriptorSet describe_keypoints(const PointCloud& cloud, const Points& keypoints, const EncoderConfig& config,
                                 const NetworkWeights& weights, int threads) {
  if (weights.arch.input_tensor_shape() != config.grid_shape())
    throw ConfigError("weights expect input " + shape_string(weights.arch.input_tensor_shape()) +
                      " but the encoder produces " + shape_string(config.grid_shape()));
  const RadiusIndex index(cloud.points, config.voxel.radius);
  const auto encoded = encode_keypoints(index, keypoints, config, threads);
  DescriptorSet set;
  set.keypoints = keypoints;
  set.descriptors = forward_batch(encoded, weights, threads);
  set.flags.resize(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) set.flags[i] = encoded[i].fallback_frame ? 1 : 0;
  return set;
}

}  // namespace spherereg
