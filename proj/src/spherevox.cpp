#include "spherereg/spherevox.hpp"

#include <cstring>

#include "spherereg/io.hpp"

namespace spherereg {

namespace {
constexpr double kPi = EIGEN_PI;
constexpr double kTwoPi = 2.0 * EIGEN_PI;
}  // namespace

void VoxelParams::validate() const {
  if (radial_bins < 1 || elevation_bins < 1 || azimuth_bins < 1)
    throw ConfigError("voxel bin counts must be >= 1");
  if (!(radius > 0.0)) throw ConfigError("voxel radius must be positive");
}

double VoxelParams::elevation_width() const { return kPi / elevation_bins; }
double VoxelParams::azimuth_width() const { return kTwoPi / azimuth_bins; }

std::array<int, 3> hard_bin(const SphericalCoord<double>& c, const VoxelParams& p) {
  auto bin = [](double v, double width, int count) {
    const int i = static_cast<int>(std::floor(v / width));
    return std::clamp(i, 0, count - 1);
  };
  return {bin(c.r, p.radial_width(), p.radial_bins), bin(c.theta, p.elevation_width(), p.elevation_bins),
          bin(c.phi, p.azimuth_width(), p.azimuth_bins)};
}

FeatureGrid voxelize_hard(const Patch& local_patch, const VoxelParams& params) {
  params.validate();
  FeatureGrid grid;
  grid.values = Tensor4d(1, params.radial_bins, params.elevation_bins, params.azimuth_bins);
  grid.scales = {params};
  for (Eigen::Index j = 0; j < local_patch.size(); ++j) {
    const auto c = spherical_coords(local_patch.neighbors.col(j));
    if (c.r > params.radius) {
      ++grid.dropped;
      continue;
    }
    const auto [n, m, k] = hard_bin(c, params);
    grid.values(0, n, m, k) += 1.0;
  }
  return grid;
}

InterpWeights interp_weights(const SphericalCoord<double>& c, const VoxelParams& params,
                             const InterpOptions& options) {
  params.validate();
  if (c.r > params.radius) throw ConfigError("interp_weights: point lies outside the outer radius");
  InterpWeights out;

  // Two candidate regions bracket the coordinate: the centerline at or
  // below it and the next one up.
  auto linear = [](double v, double width, int count, double clamp_lo, double clamp_hi,
                   std::vector<AxisWeight>& dst) {
    const int lower = static_cast<int>(std::floor(v / width - 0.5));
    for (int region : {lower, lower + 1}) {
      if (region < 0 || region >= count) continue;
      const double d = std::abs((region + 0.5) * width - v);
      if (d >= width) continue;
      const double w = (v < clamp_lo || v > clamp_hi) ? 1.0 : 1.0 - d / width;
      if (w > 0.0) dst.push_back({region, w});
    }
  };

  const double wr = params.radial_width();
  linear(c.r, wr, params.radial_bins, 0.5 * wr, std::numeric_limits<double>::infinity(), out.radial);

  const double wt = params.elevation_width();
  linear(c.theta, wt, params.elevation_bins, 0.5 * wt, kPi - 0.5 * wt, out.elevation);

  const double wp = params.azimuth_width();
  const int K = params.azimuth_bins;
  if (K == 1) {
    out.azimuth.push_back({0, 1.0});
  } else {
    const int lower = static_cast<int>(std::floor(c.phi / wp - 0.5));
    for (int raw : {lower, lower + 1}) {
      int region = raw;
      double d = std::abs((raw + 0.5) * wp - c.phi);
      if (options.wrap_azimuth) {
        region = ((raw % K) + K) % K;
        d = std::abs((region + 0.5) * wp - c.phi);
        d = std::min(d, kTwoPi - d);
      } else if (raw < 0 || raw >= K) {
        continue;
      }
      if (d >= wp) continue;
      const double w = 1.0 - d / wp;
      if (w > 0.0) out.azimuth.push_back({region, w});
    }
  }
  return out;
}

FeatureGrid voxelize_interp(const Patch& local_patch, const VoxelParams& params,
                            const InterpOptions& options) {
  params.validate();
  FeatureGrid grid;
  grid.values = Tensor4d(1, params.radial_bins, params.elevation_bins, params.azimuth_bins);
  grid.scales = {params};
  for (Eigen::Index j = 0; j < local_patch.size(); ++j) {
    const auto c = spherical_coords(local_patch.neighbors.col(j));
    if (c.r > params.radius) {
      ++grid.dropped;
      continue;
    }
    const InterpWeights w = interp_weights(c, params, options);
    for (const auto& wr : w.radial)
      for (const auto& wt : w.elevation)
        for (const auto& wp : w.azimuth)
          grid.values(0, wr.region, wt.region, wp.region) += wr.weight * wt.weight * wp.weight;
  }
  return grid;
}

FeatureGrid msf_fuse(const Patch& local_patch, const VoxelParams& params,
                     const std::array<double, 3>& fractions, const InterpOptions& options) {
  params.validate();
  if (params.radial_bins % 3 != 0) throw ConfigError("multiscale fusion needs N divisible by 3");
  if (!(fractions[0] > 0.0 && fractions[0] < fractions[1] && fractions[1] < fractions[2] &&
        fractions[2] == 1.0))
    throw ConfigError("radius fractions must be strictly increasing and end at 1");
  FeatureGrid grid;
  const int n = params.radial_bins / 3;
  grid.values = Tensor4d(3, n, params.elevation_bins, params.azimuth_bins);
  for (int s = 0; s < 3; ++s) {
    VoxelParams scale = params;
    scale.radial_bins = n;
    scale.radius = fractions[static_cast<std::size_t>(s)] * params.radius;
    FeatureGrid g = voxelize_interp(local_patch, scale, options);
    const Eigen::Index block = g.values.size();
    grid.values.data().segment(s * block, block) = g.values.data();
    grid.scales.push_back(scale);
    if (s == 2) grid.dropped = g.dropped;
  }
  return grid;
}

void save_feature_grid(const FeatureGrid& grid, const std::filesystem::path& path) {
  std::string out = "SVOX";
  for (Eigen::Index d : grid.values.shape()) {
    const auto v = static_cast<std::uint32_t>(d);
    out.append(reinterpret_cast<const char*>(&v), 4);
  }
  for (Eigen::Index i = 0; i < grid.values.size(); ++i) {
    const float f = static_cast<float>(grid.values.data()[i]);
    out.append(reinterpret_cast<const char*>(&f), 4);
  }
  write_file(path, out);
}

Tensor4d load_feature_grid(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 20 || bytes.compare(0, 4, "SVOX") != 0) throw ParseError("bad SVOX header", 0);
  std::uint32_t dims[4];
  std::memcpy(dims, bytes.data() + 4, 16);
  Tensor4d t(dims[0], dims[1], dims[2], dims[3]);
  if (bytes.size() != 20 + 4 * static_cast<std::size_t>(t.size()))
    throw ParseError("SVOX payload size mismatch", 20);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 20 + 4 * i, 4);
    t.data()[i] = f;
  }
  return t;
}

}  // namespace spherereg
