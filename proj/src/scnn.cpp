#include "spherereg/scnn.hpp"

#include <cmath>
#include <cstring>

#include "json.hpp"
#include "spherereg/io.hpp"
#include "spherereg/rng.hpp"

namespace spherereg {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string to_string(PaddingMode mode) { return mode == PaddingMode::Spherical ? "spherical" : "zero"; }

PaddingMode parse_padding_mode(const std::string& name) {
  if (name == "spherical") return PaddingMode::Spherical;
  if (name == "zero") return PaddingMode::Zero;
  throw ConfigError("unknown padding mode '" + name + "'");
}

Tensor4d pad_azimuth(const Tensor4d& t, Eigen::Index pad, PaddingMode mode) {
  const Eigen::Index K = t.azimuth();
  if (pad < 0 || pad > K) throw ConfigError("azimuth padding exceeds the azimuth extent");
  if (pad == 0) return t;
  Tensor4d out(t.channels(), t.radial(), t.elevation(), K + 2 * pad);
  const Eigen::Index rows = t.channels() * t.radial() * t.elevation();
  const double* src = t.data().data();
  double* dst = out.data().data();
  for (Eigen::Index row = 0; row < rows; ++row, src += K, dst += K + 2 * pad) {
    std::memcpy(dst + pad, src, static_cast<std::size_t>(K) * sizeof(double));
    if (mode == PaddingMode::Spherical) {
      std::memcpy(dst, src + K - pad, static_cast<std::size_t>(pad) * sizeof(double));
      std::memcpy(dst + pad + K, src, static_cast<std::size_t>(pad) * sizeof(double));
    }
  }
  return out;
}

Tensor4d pad_spherical(const Tensor4d& t, Eigen::Index pad) { return pad_azimuth(t, pad, PaddingMode::Spherical); }
Tensor4d pad_zero(const Tensor4d& t, Eigen::Index pad) { return pad_azimuth(t, pad, PaddingMode::Zero); }

Tensor4d unpad_azimuth_grad(const Tensor4d& g, Eigen::Index pad, PaddingMode mode) {
  if (pad == 0) return g;
  const Eigen::Index K = g.azimuth() - 2 * pad;
  Tensor4d out(g.channels(), g.radial(), g.elevation(), K);
  const Eigen::Index rows = g.channels() * g.radial() * g.elevation();
  const double* src = g.data().data();
  double* dst = out.data().data();
  for (Eigen::Index row = 0; row < rows; ++row, src += K + 2 * pad, dst += K) {
    for (Eigen::Index k = 0; k < K; ++k) dst[k] = src[pad + k];
    if (mode == PaddingMode::Spherical) {
      for (Eigen::Index j = 0; j < pad; ++j) {
        dst[K - pad + j] += src[j];
        dst[j] += src[pad + K + j];
      }
    }
  }
  return out;
}

std::vector<Tensor4d::Shape> ArchConfig::layer_shapes() const {
  if (input_channels < 1 || input_shape[0] < 1 || input_shape[1] < 1 || input_shape[2] < 1)
    throw ConfigError("architecture input shape must be positive");
  if (layers.empty()) throw ConfigError("architecture needs at least one conv layer");
  if (descriptor_dim < 1) throw ConfigError("descriptor dimension must be positive");
  std::vector<Tensor4d::Shape> shapes;
  Eigen::Index c = input_channels, n = input_shape[0], m = input_shape[1];
  const Eigen::Index k = input_shape[2];
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (l.out_channels < 1 || l.kernel_radial < 1 || l.kernel_elevation < 1 || l.kernel_azimuth < 1 ||
        l.stride_radial < 1 || l.stride_elevation < 1)
      throw ConfigError(where + "sizes and strides must be positive");
    if (l.kernel_azimuth % 2 == 0) throw ConfigError(where + "azimuth kernel must be odd");
    if ((l.kernel_azimuth - 1) / 2 > k) throw ConfigError(where + "azimuth kernel wider than the sphere");
    if (l.kernel_radial > n || l.kernel_elevation > m)
      throw ConfigError(where + "kernel larger than its input " + std::to_string(n) + "x" + std::to_string(m));
    n = (n - l.kernel_radial) / l.stride_radial + 1;
    m = (m - l.kernel_elevation) / l.stride_elevation + 1;
    c = l.out_channels;
    shapes.push_back({c, n, m, k});
  }
  return shapes;
}

std::string ArchConfig::to_json() const {
  nlohmann::ordered_json j;
  j["input_channels"] = input_channels;
  j["input_shape"] = input_shape;
  j["descriptor_dim"] = descriptor_dim;
  j["padding"] = to_string(padding);
  j["leaky_slope"] = leaky_slope;
  auto arr = nlohmann::ordered_json::array();
  for (const LayerSpec& l : layers) {
    arr.push_back({{"out_channels", l.out_channels},
                   {"kernel", {l.kernel_radial, l.kernel_elevation, l.kernel_azimuth}},
                   {"stride", {l.stride_radial, l.stride_elevation}}});
  }
  j["layers"] = arr;
  return j.dump();
}

ArchConfig ArchConfig::from_json(const std::string& text) {
  ArchConfig a;
  try {
    const auto j = nlohmann::json::parse(text);
    a.input_channels = j.at("input_channels").get<int>();
    a.input_shape = j.at("input_shape").get<std::array<int, 3>>();
    a.descriptor_dim = j.at("descriptor_dim").get<int>();
    a.padding = parse_padding_mode(j.at("padding").get<std::string>());
    a.leaky_slope = j.at("leaky_slope").get<double>();
    for (const auto& l : j.at("layers")) {
      LayerSpec s;
      s.out_channels = l.at("out_channels").get<int>();
      const auto kernel = l.at("kernel").get<std::array<int, 3>>();
      const auto stride = l.at("stride").get<std::array<int, 2>>();
      s.kernel_radial = kernel[0];
      s.kernel_elevation = kernel[1];
      s.kernel_azimuth = kernel[2];
      s.stride_radial = stride[0];
      s.stride_elevation = stride[1];
      a.layers.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed architecture descriptor: ") + e.what());
  }
  a.layer_shapes();
  return a;
}

ArchConfig default_arch(const VoxelParams& params, bool msf, const std::vector<int>& channels,
                        int descriptor_dim) {
  ArchConfig a;
  a.input_channels = msf ? 3 : 1;
  a.input_shape = {msf ? params.radial_bins / 3 : params.radial_bins, params.elevation_bins, params.azimuth_bins};
  a.descriptor_dim = descriptor_dim;
  int n = a.input_shape[0], m = a.input_shape[1];
  for (std::size_t i = 0; i < channels.size(); ++i) {
    LayerSpec l;
    l.out_channels = channels[i];
    l.kernel_radial = n >= 3 ? 3 : 1;
    l.kernel_elevation = m >= 3 ? 3 : 1;
    l.kernel_azimuth = params.azimuth_bins >= 3 ? 3 : 1;
    if (i == 2 && m >= l.kernel_elevation + 2) l.stride_elevation = 2;
    n = (n - l.kernel_radial) / l.stride_radial + 1;
    m = (m - l.kernel_elevation) / l.stride_elevation + 1;
    a.layers.push_back(l);
  }
  a.layer_shapes();
  return a;
}

Eigen::Index NetworkWeights::parameter_count() const {
  Eigen::Index n = projection.size() + projection_bias.size();
  for (const ConvLayer& l : layers) n += l.kernel.size() + l.bias.size();
  return n;
}

Eigen::VectorXd NetworkWeights::flatten() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index at = 0;
  auto put = [&](const double* p, Eigen::Index n) {
    out.segment(at, n) = Eigen::Map<const Eigen::VectorXd>(p, n);
    at += n;
  };
  for (const ConvLayer& l : layers) {
    put(l.kernel.data(), l.kernel.size());
    put(l.bias.data(), l.bias.size());
  }
  put(projection.data(), projection.size());
  put(projection_bias.data(), projection_bias.size());
  return out;
}

void NetworkWeights::unflatten(const Eigen::Ref<const Eigen::VectorXd>& params) {
  if (params.size() != parameter_count()) throw ConfigError("parameter vector size mismatch");
  Eigen::Index at = 0;
  auto get = [&](double* p, Eigen::Index n) {
    Eigen::Map<Eigen::VectorXd>(p, n) = params.segment(at, n);
    at += n;
  };
  for (ConvLayer& l : layers) {
    get(l.kernel.data(), l.kernel.size());
    get(l.bias.data(), l.bias.size());
  }
  get(projection.data(), projection.size());
  get(projection_bias.data(), projection_bias.size());
}

NetworkWeights init_weights(std::uint64_t seed, const ArchConfig& arch) {
  const auto shapes = arch.layer_shapes();
  NetworkWeights w;
  w.arch = arch;
  w.seed = seed;
  auto gen = make_rng(seed, 0x5e7);
  auto fill = [&](double* p, Eigen::Index n, double bound) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = bound * (2.0 * uniform01(gen) - 1.0);
  };
  int in = arch.input_channels;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    ConvLayer l;
    l.spec = arch.layers[i];
    l.in_channels = in;
    const int fan_in = in * l.spec.kernel_radial * l.spec.kernel_elevation * l.spec.kernel_azimuth;
    l.kernel.resize(l.spec.out_channels, fan_in);
    l.bias.resize(l.spec.out_channels);
    fill(l.kernel.data(), l.kernel.size(), std::sqrt(6.0 / fan_in));
    fill(l.bias.data(), l.bias.size(), 1.0 / std::sqrt(static_cast<double>(fan_in)));
    in = l.spec.out_channels;
    w.layers.push_back(std::move(l));
  }
  w.projection.resize(arch.descriptor_dim, in);
  w.projection_bias.resize(arch.descriptor_dim);
  fill(w.projection.data(), w.projection.size(), std::sqrt(3.0 / in));
  fill(w.projection_bias.data(), w.projection_bias.size(), 1.0 / std::sqrt(static_cast<double>(in)));
  return w;
}

namespace {

struct ConvGeometry {
  Eigen::Index c, n, m, kp;       // padded input
  Eigen::Index no, mo, ko;        // output
  int a, b, f, sr, se;
};

ConvGeometry geometry_of(const Tensor4d& in, const ConvLayer& layer) {
  ConvGeometry g;
  g.c = in.channels();
  g.n = in.radial();
  g.m = in.elevation();
  g.kp = in.azimuth();
  g.a = layer.spec.kernel_radial;
  g.b = layer.spec.kernel_elevation;
  g.f = layer.spec.kernel_azimuth;
  g.sr = layer.spec.stride_radial;
  g.se = layer.spec.stride_elevation;
  if (g.c != layer.in_channels)
    throw ConfigError("sconv: input has " + std::to_string(g.c) + " channels, layer expects " +
                      std::to_string(layer.in_channels));
  if (g.n < g.a || g.m < g.b || g.kp < g.f) throw ConfigError("sconv: input smaller than kernel");
  g.no = (g.n - g.a) / g.sr + 1;
  g.mo = (g.m - g.b) / g.se + 1;
  g.ko = g.kp - g.f + 1;
  return g;
}

RowMatrix im2col(const Tensor4d& in, const ConvGeometry& g) {
  RowMatrix cols(g.c * g.a * g.b * g.f, g.no * g.mo * g.ko);
  const double* src = in.data().data();
  for (Eigen::Index d = 0; d < g.c; ++d)
    for (int r = 0; r < g.a; ++r)
      for (int t = 0; t < g.b; ++t)
        for (int f = 0; f < g.f; ++f) {
          const Eigen::Index row = ((d * g.a + r) * g.b + t) * g.f + f;
          double* dst = cols.row(row).data();
          for (Eigen::Index n = 0; n < g.no; ++n)
            for (Eigen::Index m = 0; m < g.mo; ++m) {
              const double* s = src + ((d * g.n + n * g.sr + r) * g.m + m * g.se + t) * g.kp + f;
              std::memcpy(dst + (n * g.mo + m) * g.ko, s, static_cast<std::size_t>(g.ko) * sizeof(double));
            }
        }
  return cols;
}

void col2im(const RowMatrix& cols, const ConvGeometry& g, Tensor4d& out) {
  double* dst = out.data().data();
  for (Eigen::Index d = 0; d < g.c; ++d)
    for (int r = 0; r < g.a; ++r)
      for (int t = 0; t < g.b; ++t)
        for (int f = 0; f < g.f; ++f) {
          const Eigen::Index row = ((d * g.a + r) * g.b + t) * g.f + f;
          const double* src = cols.row(row).data();
          for (Eigen::Index n = 0; n < g.no; ++n)
            for (Eigen::Index m = 0; m < g.mo; ++m) {
              double* o = dst + ((d * g.n + n * g.sr + r) * g.m + m * g.se + t) * g.kp + f;
              const double* s = src + (n * g.mo + m) * g.ko;
              for (Eigen::Index k = 0; k < g.ko; ++k) o[k] += s[k];
            }
        }
}

double leaky(double x, double slope) { return x > 0.0 ? x : slope * x; }

}  // namespace

Tensor4d sconv_forward(const Tensor4d& padded_input, const ConvLayer& layer) {
  const ConvGeometry g = geometry_of(padded_input, layer);
  const RowMatrix cols = im2col(padded_input, g);
  Tensor4d out(layer.spec.out_channels, g.no, g.mo, g.ko);
  auto rows = out.channel_rows();
  rows.noalias() = layer.kernel * cols;
  rows.colwise() += layer.bias;
  return out;
}

ConvGradients sconv_backward(const Tensor4d& padded_input, const ConvLayer& layer, const Tensor4d& output_grad) {
  const ConvGeometry g = geometry_of(padded_input, layer);
  if (output_grad.shape() != Tensor4d::Shape{layer.spec.out_channels, g.no, g.mo, g.ko})
    throw ConfigError("sconv_backward: output gradient shape mismatch");
  const RowMatrix cols = im2col(padded_input, g);
  const auto dout = output_grad.channel_rows();
  ConvGradients grads;
  grads.kernel.noalias() = dout * cols.transpose();
  grads.bias = dout.rowwise().sum();
  const RowMatrix dcols = layer.kernel.transpose() * dout;
  grads.input = Tensor4d(padded_input.shape());
  col2im(dcols, g, grads.input);
  return grads;
}

Tensor4d azimuth_max_pool(const Tensor4d& t) {
  Tensor4d out(t.channels(), t.radial(), t.elevation(), 1);
  const Eigen::Index K = t.azimuth();
  const Eigen::Index rows = t.channels() * t.radial() * t.elevation();
  for (Eigen::Index row = 0; row < rows; ++row)
    out.data()[row] = t.data().segment(row * K, K).maxCoeff();
  return out;
}

ForwardTrace forward_trace(const Tensor4d& input, const NetworkWeights& w) {
  if (input.shape() != w.arch.input_tensor_shape())
    throw ConfigError("network input shape " + shape_string(input.shape()) + " does not match architecture " +
                      shape_string(w.arch.input_tensor_shape()));
  ForwardTrace trace;
  const std::size_t L = w.layers.size();
  Tensor4d act = input;
  for (std::size_t l = 0; l < L; ++l) {
    const ConvLayer& layer = w.layers[l];
    trace.padded_inputs.push_back(pad_azimuth(act, (layer.spec.kernel_azimuth - 1) / 2, w.arch.padding));
    trace.pre_activations.push_back(sconv_forward(trace.padded_inputs.back(), layer));
    act = trace.pre_activations.back();
    if (l + 1 < L)
      for (Eigen::Index i = 0; i < act.size(); ++i) act.data()[i] = leaky(act.data()[i], w.arch.leaky_slope);
  }
  // Azimuth max-pool followed by a global max over radius and elevation
  // reduces to a per-channel maximum; the first maximal index wins ties.
  const auto rows = act.channel_rows();
  trace.pooled.resize(rows.rows());
  trace.pool_argmax.resize(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index c = 0; c < rows.rows(); ++c) {
    Eigen::Index arg = 0;
    trace.pooled(c) = rows.row(c).maxCoeff(&arg);
    trace.pool_argmax[static_cast<std::size_t>(c)] = arg;
  }
  trace.projected = w.projection * trace.pooled + w.projection_bias;
  const double norm = trace.projected.norm();
  trace.descriptor = trace.projected / std::max(norm, 1e-300);
  return trace;
}

Descriptor forward(const Tensor4d& input, const NetworkWeights& w) { return forward_trace(input, w).descriptor; }

Descriptor forward(const FeatureGrid& grid, const NetworkWeights& w) { return forward(grid.values, w); }

NetworkGradients backward(const ForwardTrace& trace, const NetworkWeights& w,
                          const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  if (upstream.size() != trace.descriptor.size()) throw ConfigError("upstream gradient size mismatch");
  const std::size_t L = w.layers.size();
  NetworkGradients out;
  out.parameters.setZero(w.parameter_count());

  // Offsets of each parameter block in flatten() order.
  std::vector<Eigen::Index> kernel_at(L), bias_at(L);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < L; ++l) {
    kernel_at[l] = at;
    at += w.layers[l].kernel.size();
    bias_at[l] = at;
    at += w.layers[l].bias.size();
  }
  const Eigen::Index proj_at = at;
  const Eigen::Index proj_bias_at = at + w.projection.size();

  const double norm = std::max(trace.projected.norm(), 1e-300);
  const Eigen::VectorXd& h = trace.descriptor;
  const Eigen::VectorXd dy = (upstream - h * h.dot(upstream)) / norm;

  RowMatrix dproj = dy * trace.pooled.transpose();
  out.parameters.segment(proj_at, dproj.size()) = Eigen::Map<const Eigen::VectorXd>(dproj.data(), dproj.size());
  out.parameters.segment(proj_bias_at, dy.size()) = dy;
  const Eigen::VectorXd dpooled = w.projection.transpose() * dy;

  Tensor4d grad(trace.pre_activations.back().shape());
  {
    auto rows = grad.channel_rows();
    for (Eigen::Index c = 0; c < rows.rows(); ++c) rows(c, trace.pool_argmax[static_cast<std::size_t>(c)]) = dpooled(c);
  }

  for (std::size_t l = L; l-- > 0;) {
    const ConvLayer& layer = w.layers[l];
    if (l + 1 < L) {
      const auto& pre = trace.pre_activations[l].data();
      for (Eigen::Index i = 0; i < grad.size(); ++i)
        if (!(pre[i] > 0.0)) grad.data()[i] *= w.arch.leaky_slope;
    }
    ConvGradients g = sconv_backward(trace.padded_inputs[l], layer, grad);
    out.parameters.segment(kernel_at[l], g.kernel.size()) =
        Eigen::Map<const Eigen::VectorXd>(g.kernel.data(), g.kernel.size());
    out.parameters.segment(bias_at[l], g.bias.size()) = g.bias;
    grad = unpad_azimuth_grad(g.input, (layer.spec.kernel_azimuth - 1) / 2, w.arch.padding);
  }
  out.input = std::move(grad);
  return out;
}

NetworkGradients backward(const Tensor4d& input, const NetworkWeights& w,
                          const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  return backward(forward_trace(input, w), w, upstream);
}

std::string serialize_weights(const NetworkWeights& w) {
  w.arch.layer_shapes();
  nlohmann::ordered_json meta;
  meta["architecture"] = nlohmann::ordered_json::parse(w.arch.to_json());
  meta["seed"] = w.seed;
  const std::string text = meta.dump();
  std::string out = "SNET";
  const std::uint32_t version = 1;
  const auto len = static_cast<std::uint32_t>(text.size());
  out.append(reinterpret_cast<const char*>(&version), 4);
  out.append(reinterpret_cast<const char*>(&len), 4);
  out += text;
  const Eigen::VectorXd params = w.flatten();
  const auto count = static_cast<std::uint64_t>(params.size());
  out.append(reinterpret_cast<const char*>(&count), 8);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const float f = static_cast<float>(params(i));
    out.append(reinterpret_cast<const char*>(&f), 4);
  }
  return out;
}

NetworkWeights deserialize_weights(const std::string& bytes) {
  std::size_t pos = 0;
  auto take = [&](void* dst, std::size_t n) {
    if (pos + n > bytes.size()) throw ParseError("truncated weight file", pos);
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  char magic[4];
  take(magic, 4);
  if (std::memcmp(magic, "SNET", 4) != 0) throw ParseError("bad weight file magic", 0);
  std::uint32_t version = 0, len = 0;
  take(&version, 4);
  if (version != 1) throw ParseError("unsupported weight file version " + std::to_string(version), 4);
  take(&len, 4);
  if (pos + len > bytes.size()) throw ParseError("truncated architecture block", pos);
  const std::string text = bytes.substr(pos, len);
  pos += len;
  ArchConfig arch;
  std::uint64_t seed = 0;
  try {
    const auto meta = nlohmann::json::parse(text);
    arch = ArchConfig::from_json(meta.at("architecture").dump());
    seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed architecture block: ") + e.what(), 12);
  }
  NetworkWeights w = init_weights(seed, arch);
  std::uint64_t count = 0;
  take(&count, 8);
  if (count != static_cast<std::uint64_t>(w.parameter_count()))
    throw ParseError("parameter count does not match architecture", pos - 8);
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    float f;
    take(&f, 4);
    params(i) = f;
  }
  if (pos != bytes.size()) throw ParseError("trailing bytes in weight file", pos);
  w.unflatten(params);
  return w;
}

void save_weights(const NetworkWeights& w, const std::filesystem::path& path) {
  write_file(path, serialize_weights(w));
}

NetworkWeights load_weights(const std::filesystem::path& path) { return deserialize_weights(read_file(path)); }

}  // namespace spherereg
