#include "spherereg/synth.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <numeric>

#include "spherereg/metrics.hpp"
#include "spherereg/noise.hpp"

namespace spherereg {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

// A sampled surface: area and a sampler from two uniforms.
struct Surface {
  double area;
  std::function<Vec3(double, double)> at;
};

void add_rect(std::vector<Surface>& out, const Vec3& origin, const Vec3& u, const Vec3& v) {
  out.push_back({u.cross(v).norm(), [=](double a, double b) -> Vec3 { return origin + a * u + b * v; }});
}

void add_box(std::vector<Surface>& out, const Vec3& lo, const Vec3& size) {
  const Vec3 ex(size.x(), 0, 0), ey(0, size.y(), 0), ez(0, 0, size.z());
  add_rect(out, lo + ez, ex, ey);  // top
  add_rect(out, lo, ex, ez);
  add_rect(out, lo + ey, ex, ez);
  add_rect(out, lo, ey, ez);
  add_rect(out, lo + ex, ey, ez);
}

void add_cylinder(std::vector<Surface>& out, const Vec3& base, double radius, double height) {
  out.push_back({kTwoPi * radius * height, [=](double a, double b) -> Vec3 {
                   const double phi = kTwoPi * a;
                   return base + Vec3(radius * std::cos(phi), radius * std::sin(phi), height * b);
                 }});
  out.push_back({0.5 * kTwoPi * radius * radius, [=](double a, double b) -> Vec3 {
                   const double r = radius * std::sqrt(a), phi = kTwoPi * b;
                   return base + Vec3(r * std::cos(phi), r * std::sin(phi), height);
                 }});
}

void add_sphere(std::vector<Surface>& out, const Vec3& center, double radius) {
  out.push_back({2.0 * kTwoPi * radius * radius, [=](double a, double b) -> Vec3 {
                   const double z = 2.0 * a - 1.0, phi = kTwoPi * b, s = std::sqrt(std::max(0.0, 1.0 - z * z));
                   return center + radius * Vec3(s * std::cos(phi), s * std::sin(phi), z);
                 }});
}

}  // namespace

PointCloud synth_scene(std::uint64_t seed, Eigen::Index point_count, double extent) {
  Rng gen = make_rng(seed, 11);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(gen); };
  const double h = extent / 3.0;
  std::vector<Surface> surfaces;
  add_rect(surfaces, Vec3::Zero(), Vec3(extent, 0, 0), Vec3(0, extent, 0));
  add_rect(surfaces, Vec3::Zero(), Vec3(extent, 0, 0), Vec3(0, 0, h));
  add_rect(surfaces, Vec3::Zero(), Vec3(0, extent, 0), Vec3(0, 0, h));

  const int objects = 30 + static_cast<int>(uniform_index(gen, 11));
  for (int i = 0; i < objects; ++i) {
    const double x = uni(0.25, extent - 0.25), y = uni(0.25, extent - 0.25);
    switch (uniform_index(gen, 3)) {
      case 0: {
        const Vec3 size(uni(0.15, 0.6), uni(0.15, 0.6), uni(0.1, 0.8));
        add_box(surfaces, Vec3(x - size.x() / 2, y - size.y() / 2, 0), size);
        break;
      }
      case 1:
        add_cylinder(surfaces, Vec3(x, y, 0), uni(0.06, 0.25), uni(0.2, 1.0));
        break;
      default: {
        const double r = uni(0.1, 0.3);
        add_sphere(surfaces, Vec3(x, y, r + uni(0.0, 0.5)), r);
        break;
      }
    }
  }

  std::vector<double> cumulative(surfaces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < surfaces.size(); ++i) cumulative[i] = (total += surfaces[i].area);
  PointCloud cloud;
  cloud.points.resize(3, point_count);
  for (Eigen::Index i = 0; i < point_count; ++i) {
    const double pick = uniform01(gen) * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t s = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), surfaces.size() - 1);
    const double a = uniform01(gen), b = uniform01(gen);
    cloud.points.col(i) = surfaces[s].at(a, b);
  }
  return cloud;
}

SynthPair synth_pair(std::uint64_t seed, const SynthOptions& options) {
  if (options.points_per_cloud < 3) throw ConfigError("synthetic clouds need at least 3 points");
  if (!(options.overlap > 0.0 && options.overlap <= 1.0)) throw ConfigError("overlap must lie in (0, 1]");
  const Eigen::Index n = options.points_per_cloud;
  const auto total = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * (2.0 - options.overlap)));
  const PointCloud scene = synth_scene(mix_seed(seed, 1), total, options.extent);

  Rng gen = make_rng(seed, 12);
  const double angle = kTwoPi * uniform01(gen);
  const Vec3 dir(std::cos(angle), std::sin(angle), 0.0);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scene.point(a).dot(dir) < scene.point(b).dot(dir);
  });
  std::vector<Eigen::Index> p_idx(order.begin(), order.begin() + n);
  std::vector<Eigen::Index> q_idx(order.end() - n, order.end());
  std::sort(p_idx.begin(), p_idx.end());
  std::sort(q_idx.begin(), q_idx.end());

  SynthPair pair;
  pair.seed = seed;
  const Mat3 r = random_rotation(gen);
  Vec3 t;
  for (int a = 0; a < 3; ++a) t(a) = options.max_translation * (2.0 * uniform01(gen) - 1.0);
  pair.t_gt = RigidTransformd(r, t);
  pair.p = select(scene, p_idx);
  pair.q = apply_transform(select(scene, q_idx), pair.t_gt);
  if (options.noise_sigma > 0.0) {
    pair.p = gaussian_clipped(pair.p, options.noise_sigma, options.noise_sigma, mix_seed(seed, 13));
    pair.q = gaussian_clipped(pair.q, options.noise_sigma, options.noise_sigma, mix_seed(seed, 14));
  }
  const CorrespondenceSet gt = gt_correspondences(pair.p, pair.q, pair.t_gt, options.tau1);
  for (Eigen::Index k = 0; k < gt.size(); ++k)
    pair.correspondences.emplace_back(gt.source_index[static_cast<std::size_t>(k)],
                                      gt.target_index[static_cast<std::size_t>(k)]);
  return pair;
}

std::vector<SynthPair> synth_pair_dataset(std::uint64_t seed, int scene_count, const SynthOptions& options) {
  std::vector<SynthPair> out;
  out.reserve(static_cast<std::size_t>(std::max(0, scene_count)));
  for (int s = 0; s < scene_count; ++s) out.push_back(synth_pair(mix_seed(seed, static_cast<std::uint64_t>(s)), options));
  return out;
}

}  // namespace spherereg
