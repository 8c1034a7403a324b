#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "spherereg/error.hpp"
#include "spherereg/rng.hpp"

namespace spherereg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Points = Eigen::Matrix3Xd;

/// Ordered set of 3D points (one per column) with an optional sensor origin.
struct PointCloud {
  Points points = Points(3, 0);
  Vec3 sensor_origin = Vec3::Zero();

  PointCloud() = default;
  explicit PointCloud(Points pts, const Vec3& origin = Vec3::Zero())
      : points(std::move(pts)), sensor_origin(origin) {}

  Eigen::Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }
  auto point(Eigen::Index i) const { return points.col(i); }
  bool all_finite() const { return points.allFinite() && sensor_origin.allFinite(); }
};

/// Rigid motion p -> R p + t with R in SO(3).
template <typename Scalar>
struct RigidTransform {
  using Vector = Eigen::Matrix<Scalar, 3, 1>;
  using Matrix = Eigen::Matrix<Scalar, 3, 3>;
  using Homogeneous = Eigen::Matrix<Scalar, 4, 4>;

  Matrix rotation = Matrix::Identity();
  Vector translation = Vector::Zero();

  RigidTransform() = default;
  RigidTransform(const Matrix& r, const Vector& t) : rotation(r), translation(t) {}

  static RigidTransform identity() { return {}; }

  template <typename Derived>
  Vector operator()(const Eigen::MatrixBase<Derived>& p) const {
    return rotation * p + translation;
  }

  // (this * other)(p) == this(other(p))
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  RigidTransform inverse() const {
    const Matrix rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  Homogeneous matrix() const {
    Homogeneous m = Homogeneous::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }

  // True when R^T R = I and det R = +1 within `tol`.
  bool is_valid(Scalar tol = Scalar(1e-9)) const {
    return (rotation.transpose() * rotation - Matrix::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - Scalar(1)) <= tol && translation.allFinite();
  }
};

using RigidTransformd = RigidTransform<double>;

// compose(outer, inner)(p) == outer(inner(p))
inline RigidTransformd compose(const RigidTransformd& outer, const RigidTransformd& inner) {
  return outer * inner;
}
inline RigidTransformd invert(const RigidTransformd& t) { return t.inverse(); }

/// Builds a transform from a 4x4 homogeneous matrix. The rotation block is
/// projected onto SO(3) if it deviates by more than `tol`; larger deviations
/// and a non-affine last row throw ConfigError.
RigidTransformd transform_from_matrix(const Mat4& m, double tol = 1e-6);

/// Nearest rotation (Frobenius norm) with det = +1.
Mat3 project_to_rotation(const Mat3& m);

PointCloud apply_transform(const PointCloud& cloud, const RigidTransformd& t);

/// A superpoint with its radius neighbors, stored as columns.
struct Patch {
  Vec3 center = Vec3::Zero();
  Points neighbors = Points(3, 0);
  double radius = 0.0;

  Eigen::Index size() const { return neighbors.cols(); }
};

/// Uniform hash grid for exact fixed-radius queries. Cell size equals the
/// nominal query radius; queries with a larger radius visit more cells.
class RadiusIndex {
 public:
  RadiusIndex(const Points& points, double cell_size);

  /// Indices of points with |p - center| <= radius, ascending.
  std::vector<Eigen::Index> query(const Vec3& center, double radius) const;

  /// Index of the nearest point within `radius`, or -1. Ties go to the
  /// lower index.
  Eigen::Index nearest(const Vec3& center, double radius) const;

  double cell_size() const { return cell_; }
  const Points& points() const { return *points_; }

 private:
  std::int64_t key(std::int64_t x, std::int64_t y, std::int64_t z) const;
  Eigen::Vector3i cell_of(const Vec3& p) const;

  const Points* points_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<Eigen::Index>> cells_;
};

/// Neighbors of `center` within R, excluding points coincident with it.
Patch radius_neighbors(const PointCloud& cloud, const Vec3& center, double radius);
Patch radius_neighbors(const RadiusIndex& index, const Vec3& center, double radius);

/// Indices of `count` distinct points drawn uniformly without replacement.
std::vector<Eigen::Index> random_downsample_indices(Eigen::Index size, Eigen::Index count,
                                                    std::uint64_t seed);
PointCloud random_downsample(const PointCloud& cloud, Eigen::Index count, std::uint64_t seed);

PointCloud select(const PointCloud& cloud, const std::vector<Eigen::Index>& indices);

/// Rotation matrix from a uniformly distributed unit quaternion.
template <typename Gen>
Mat3 random_rotation(Gen& gen) {
  Eigen::Quaterniond q(standard_normal(gen), standard_normal(gen), standard_normal(gen),
                       standard_normal(gen));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace spherereg
