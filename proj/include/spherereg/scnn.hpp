#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spherereg/spherevox.hpp"
#include "spherereg/tensor.hpp"

namespace spherereg {

enum class PaddingMode { Spherical, Zero };

std::string to_string(PaddingMode mode);
PaddingMode parse_padding_mode(const std::string& name);

/// Circular azimuth padding: the left margin repeats the last `pad` slices,
/// the right margin the first `pad` slices.
Tensor4d pad_spherical(const Tensor4d& t, Eigen::Index pad);
/// Zero azimuth padding (ablation mode).
Tensor4d pad_zero(const Tensor4d& t, Eigen::Index pad);
Tensor4d pad_azimuth(const Tensor4d& t, Eigen::Index pad, PaddingMode mode);

/// Adjoint of pad_azimuth: folds a gradient on the padded tensor back onto
/// the unpadded one (circular padding accumulates the seam slices).
Tensor4d unpad_azimuth_grad(const Tensor4d& padded_grad, Eigen::Index pad, PaddingMode mode);

struct LayerSpec {
  int out_channels = 32;
  int kernel_radial = 3;
  int kernel_elevation = 3;
  int kernel_azimuth = 3;  // odd
  int stride_radial = 1;
  int stride_elevation = 1;
};

struct ArchConfig {
  int input_channels = 1;
  std::array<int, 3> input_shape{15, 20, 40};  // radial, elevation, azimuth
  std::vector<LayerSpec> layers;
  int descriptor_dim = 32;
  PaddingMode padding = PaddingMode::Spherical;
  double leaky_slope = 0.01;

  /// Output shape of every conv layer; throws ConfigError if they don't chain.
  std::vector<Tensor4d::Shape> layer_shapes() const;
  Tensor4d::Shape input_tensor_shape() const {
    return {input_channels, input_shape[0], input_shape[1], input_shape[2]};
  }
  std::string to_json() const;
  static ArchConfig from_json(const std::string& text);
  bool operator==(const ArchConfig& other) const { return to_json() == other.to_json(); }
};

/// Conv stack for a voxel grid: valid 3-wide kernels in radius and
/// elevation (1-wide once an axis has collapsed below 3), circular 3-wide
/// kernels in azimuth, and a 2x elevation stride on the third layer.
ArchConfig default_arch(const VoxelParams& params, bool msf,
                        const std::vector<int>& channels = {32, 64, 64, 128}, int descriptor_dim = 32);

/// One spherical convolution. `kernel` is out x (in * a * b * c) with the
/// column index ((d * a + r) * b + t) * c + f.
struct ConvLayer {
  LayerSpec spec;
  int in_channels = 1;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> kernel;
  Eigen::VectorXd bias;

  double& weight(int out, int in, int r, int t, int f) {
    return kernel(out, ((in * spec.kernel_radial + r) * spec.kernel_elevation + t) * spec.kernel_azimuth + f);
  }
  double weight(int out, int in, int r, int t, int f) const {
    return kernel(out, ((in * spec.kernel_radial + r) * spec.kernel_elevation + t) * spec.kernel_azimuth + f);
  }
};

struct NetworkWeights {
  ArchConfig arch;
  std::vector<ConvLayer> layers;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> projection;  // dim x C_last
  Eigen::VectorXd projection_bias;
  std::uint64_t seed = 0;

  Eigen::Index parameter_count() const;
  /// Parameters in file order: per layer kernel (row-major) then bias, then
  /// projection (row-major) and its bias.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::Ref<const Eigen::VectorXd>& params);
};

/// Fan-in scaled uniform initialization, deterministic in `seed`.
NetworkWeights init_weights(std::uint64_t seed, const ArchConfig& arch);

/// Valid correlation over an azimuth-padded input:
/// out[o][n][m][k] = bias[o] + sum w[o][d][r][t][f] * in[d][n*sr + r][m*se + t][k + f].
Tensor4d sconv_forward(const Tensor4d& padded_input, const ConvLayer& layer);

struct ConvGradients {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> kernel;
  Eigen::VectorXd bias;
  Tensor4d input;  // gradient w.r.t. the padded input
};
ConvGradients sconv_backward(const Tensor4d& padded_input, const ConvLayer& layer, const Tensor4d& output_grad);

/// Elementwise max over azimuth; result has azimuth extent 1.
Tensor4d azimuth_max_pool(const Tensor4d& t);

using Descriptor = Eigen::VectorXd;

/// Conv stack (padding before every layer, leaky rectifier after all but
/// the last) -> azimuth max-pool -> global max-pool -> linear -> L2 normalize.
Descriptor forward(const Tensor4d& input, const NetworkWeights& w);
Descriptor forward(const FeatureGrid& grid, const NetworkWeights& w);

/// Activations kept for the reverse pass.
struct ForwardTrace {
  std::vector<Tensor4d> padded_inputs;   // input to each conv, after padding
  std::vector<Tensor4d> pre_activations;
  std::vector<Eigen::Index> pool_argmax;  // flat offset into the last conv output, per channel
  Eigen::VectorXd pooled;
  Eigen::VectorXd projected;  // before normalization
  Descriptor descriptor;
};
ForwardTrace forward_trace(const Tensor4d& input, const NetworkWeights& w);

struct NetworkGradients {
  Eigen::VectorXd parameters;  // flatten() order
  Tensor4d input;
};

/// Reverse-mode gradients of <upstream, descriptor>.
NetworkGradients backward(const ForwardTrace& trace, const NetworkWeights& w,
                          const Eigen::Ref<const Eigen::VectorXd>& upstream);
NetworkGradients backward(const Tensor4d& input, const NetworkWeights& w,
                          const Eigen::Ref<const Eigen::VectorXd>& upstream);

/// "SNET", u32 version, u32 length + JSON architecture text, u64 parameter
/// count, float32 parameters in flatten() order.
void save_weights(const NetworkWeights& w, const std::filesystem::path& path);
NetworkWeights load_weights(const std::filesystem::path& path);
std::string serialize_weights(const NetworkWeights& w);
NetworkWeights deserialize_weights(const std::string& bytes);

}  // namespace spherereg
