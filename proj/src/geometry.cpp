#include "spherereg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spherereg/rng.hpp"

namespace spherereg {

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

RigidTransformd transform_from_matrix(const Mat4& m, double tol) {
  if (!m.allFinite()) throw ConfigError("transform contains non-finite values");
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tol)
    throw ConfigError("transform last row must be 0 0 0 1");
  RigidTransformd t(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
  if (t.is_valid(1e-9)) return t;
  if (!t.is_valid(tol)) throw ConfigError("transform rotation block is not a proper rotation");
  t.rotation = project_to_rotation(t.rotation);
  return t;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransformd& t) {
  PointCloud out;
  out.points = (t.rotation * cloud.points).colwise() + t.translation;
  out.sensor_origin = t(cloud.sensor_origin);
  return out;
}

RadiusIndex::RadiusIndex(const Points& points, double cell_size) : points_(&points), cell_(cell_size) {
  if (!(cell_size > 0.0)) throw ConfigError("RadiusIndex: cell size must be positive");
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const Eigen::Vector3i c = cell_of(points.col(i));
    cells_[key(c.x(), c.y(), c.z())].push_back(i);
  }
}

Eigen::Vector3i RadiusIndex::cell_of(const Vec3& p) const {
  return (p / cell_).array().floor().cast<int>();
}

std::int64_t RadiusIndex::key(std::int64_t x, std::int64_t y, std::int64_t z) const {
  // 21 bits per axis, wrapping; collisions only merge buckets, never lose points.
  constexpr std::int64_t mask = (1 << 21) - 1;
  return ((x & mask) << 42) | ((y & mask) << 21) | (z & mask);
}

std::vector<Eigen::Index> RadiusIndex::query(const Vec3& center, double radius) const {
  std::vector<Eigen::Index> out;
  if (!(radius >= 0.0)) return out;
  const Eigen::Vector3i lo = ((center.array() - radius) / cell_).floor().cast<int>();
  const Eigen::Vector3i hi = ((center.array() + radius) / cell_).floor().cast<int>();
  const double r2 = radius * radius;
  const std::size_t span = static_cast<std::size_t>(hi.x() - lo.x() + 1) *
                           static_cast<std::size_t>(hi.y() - lo.y() + 1) *
                           static_cast<std::size_t>(hi.z() - lo.z() + 1);
  if (span > 4 * cells_.size() + 64) {
    // Query box larger than the occupied grid: a scan is cheaper.
    for (Eigen::Index i = 0; i < points_->cols(); ++i)
      if ((points_->col(i) - center).squaredNorm() <= r2) out.push_back(i);
    return out;
  }
  for (int x = lo.x(); x <= hi.x(); ++x)
    for (int y = lo.y(); y <= hi.y(); ++y)
      for (int z = lo.z(); z <= hi.z(); ++z) {
        auto it = cells_.find(key(x, y, z));
        if (it == cells_.end()) continue;
        for (Eigen::Index i : it->second)
          if ((points_->col(i) - center).squaredNorm() <= r2) out.push_back(i);
      }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Eigen::Index RadiusIndex::nearest(const Vec3& center, double radius) const {
  Eigen::Index best = -1;
  double best_d2 = 0.0;
  for (Eigen::Index i : query(center, radius)) {
    const double d2 = (points_->col(i) - center).squaredNorm();
    if (best < 0 || d2 < best_d2) {
      best = i;
      best_d2 = d2;
    }
  }
  return best;
}

namespace {

Patch make_patch(const Points& points, const std::vector<Eigen::Index>& idx, const Vec3& center,
                 double radius) {
  Patch patch;
  patch.center = center;
  patch.radius = radius;
  patch.neighbors.resize(3, static_cast<Eigen::Index>(idx.size()));
  Eigen::Index n = 0;
  for (Eigen::Index i : idx) {
    if ((points.col(i) - center).squaredNorm() == 0.0) continue;
    patch.neighbors.col(n++) = points.col(i);
  }
  patch.neighbors.conservativeResize(3, n);
  return patch;
}

}  // namespace

Patch radius_neighbors(const RadiusIndex& index, const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw ConfigError("radius_neighbors: radius must be positive");
  return make_patch(index.points(), index.query(center, radius), center, radius);
}

Patch radius_neighbors(const PointCloud& cloud, const Vec3& center, double radius) {
  RadiusIndex index(cloud.points, radius);
  return radius_neighbors(index, center, radius);
}

std::vector<Eigen::Index> random_downsample_indices(Eigen::Index size, Eigen::Index count,
                                                    std::uint64_t seed) {
  if (count < 0 || count > size)
    throw ConfigError("random_downsample: requested " + std::to_string(count) + " of " +
                      std::to_string(size) + " points");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(size));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto gen = make_rng(seed);
  // Partial Fisher-Yates: the first `count` slots are the sample.
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Eigen::Index>(uniform_index(gen, static_cast<std::uint64_t>(size - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

PointCloud select(const PointCloud& cloud, const std::vector<Eigen::Index>& indices) {
  PointCloud out;
  out.sensor_origin = cloud.sensor_origin;
  out.points.resize(3, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k)
    out.points.col(static_cast<Eigen::Index>(k)) = cloud.points.col(indices[k]);
  return out;
}

PointCloud random_downsample(const PointCloud& cloud, Eigen::Index count, std::uint64_t seed) {
  return select(cloud, random_downsample_indices(cloud.size(), count, seed));
}

}  // namespace spherereg
