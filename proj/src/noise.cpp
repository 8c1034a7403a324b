#include "spherereg/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spherereg/rng.hpp"

namespace spherereg {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::GaussianClipped: return "gaussian_clipped";
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::ReplaceOutliers: return "replace_outliers";
    case NoiseKind::RangeNoise: return "range_noise";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian_clipped" || name == "noise1") return NoiseKind::GaussianClipped;
  if (name == "uniform" || name == "noise2") return NoiseKind::Uniform;
  if (name == "replace_outliers" || name == "noise3") return NoiseKind::ReplaceOutliers;
  if (name == "range_noise" || name == "noise4") return NoiseKind::RangeNoise;
  throw ConfigError("unknown noise kind '" + name + "'");
}

void NoiseSpec::validate() const {
  if (!(sigma > 0)) throw ConfigError("noise sigma must be positive");
  if (kind == NoiseKind::GaussianClipped && !(clip > 0)) throw ConfigError("noise clip must be positive");
  if (kind == NoiseKind::ReplaceOutliers && !(fraction > 0 && fraction < 1))
    throw ConfigError("outlier fraction must lie in (0, 1)");
}

std::string NoiseSpec::to_string() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "kind=%s,sigma=%.17g,clip=%.17g,fraction=%.17g,seed=%llu",
                spherereg::to_string(kind).c_str(), sigma, clip, fraction, static_cast<unsigned long long>(seed));
  std::string out = buf;
  if (has_origin) {
    std::snprintf(buf, sizeof buf, ",ox=%.17g,oy=%.17g,oz=%.17g", origin.x(), origin.y(), origin.z());
    out += buf;
  }
  return out;
}

NoiseSpec parse_noise_spec(const std::string& text) {
  NoiseSpec spec;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("noise spec item '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    try {
      if (key == "kind") spec.kind = parse_noise_kind(value);
      else if (key == "sigma" || key == "half_width") spec.sigma = std::stod(value);
      else if (key == "clip") spec.clip = std::stod(value);
      else if (key == "fraction") spec.fraction = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "ox" || key == "oy" || key == "oz") {
        spec.has_origin = true;
        spec.origin(key[1] - 'x') = std::stod(value);
      } else
        throw ConfigError("unknown noise spec key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad value for noise spec key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

PointCloud gaussian_clipped(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed) {
  Rng gen = make_rng(seed, 1);
  PointCloud out = cloud;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    for (int a = 0; a < 3; ++a) out.points(a, i) += std::clamp(sigma * standard_normal(gen), -clip, clip);
  return out;
}

PointCloud uniform_noise(const PointCloud& cloud, double half_width, std::uint64_t seed) {
  Rng gen = make_rng(seed, 2);
  PointCloud out = cloud;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    for (int a = 0; a < 3; ++a) out.points(a, i) += half_width * (2.0 * uniform01(gen) - 1.0);
  return out;
}

PointCloud replace_outliers(const PointCloud& cloud, double fraction, double sigma, std::uint64_t seed) {
  PointCloud out = cloud;
  if (cloud.empty()) return out;
  const auto count = static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(cloud.size())));
  const Vec3 centroid = cloud.points.rowwise().mean();
  Rng gen = make_rng(seed, 3);
  for (Eigen::Index i : random_downsample_indices(cloud.size(), count, mix_seed(seed, 4))) {
    for (int a = 0; a < 3; ++a) out.points(a, i) = centroid(a) + sigma * standard_normal(gen);
  }
  return out;
}

PointCloud range_noise(const PointCloud& cloud, const Vec3& origin, double sigma, std::uint64_t seed) {
  Rng gen = make_rng(seed, 5);
  PointCloud out = cloud;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    // Draw for every point so the stream does not depend on geometry.
    const double delta = std::clamp(sigma * standard_normal(gen), -3.0 * sigma, 3.0 * sigma);
    const Vec3 ray = cloud.point(i) - origin;
    const double len = ray.norm();
    if (len == 0.0) continue;
    out.points.col(i) += delta * ray / len;
  }
  return out;
}

PointCloud apply_noise(const PointCloud& cloud, const NoiseSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case NoiseKind::GaussianClipped: return gaussian_clipped(cloud, spec.sigma, spec.clip, spec.seed);
    case NoiseKind::Uniform: return uniform_noise(cloud, spec.sigma, spec.seed);
    case NoiseKind::ReplaceOutliers: return replace_outliers(cloud, spec.fraction, spec.sigma, spec.seed);
    case NoiseKind::RangeNoise:
      return range_noise(cloud, spec.has_origin ? spec.origin : cloud.sensor_origin, spec.sigma, spec.seed);
  }
  return cloud;
}

}  // namespace spherereg
