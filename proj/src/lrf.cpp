#include "spherereg/lrf.hpp"

#include <Eigen/Eigenvalues>

namespace spherereg {

namespace {

Eigen::VectorXd patch_weights(const Patch& patch) {
  const Eigen::Index n = patch.size();
  if (n < 3) throw DegenerateError("patch has " + std::to_string(n) + " neighbors, need at least 3");
  const Points offsets = patch.neighbors.colwise() - patch.center;
  Eigen::VectorXd w = (patch.radius - offsets.colwise().norm().array()).matrix().transpose();
  const double total = w.sum();
  if (!(total > 0.0)) throw DegenerateError("patch weights sum to zero (all neighbors on the boundary)");
  return w / total;
}

}  // namespace

Mat3 weighted_covariance(const Patch& patch) {
  const Eigen::VectorXd w = patch_weights(patch);
  const Points offsets = patch.neighbors.colwise() - patch.center;
  Mat3 m = offsets * w.asDiagonal() * offsets.transpose();
  // Exact symmetry regardless of summation rounding.
  return 0.5 * (m + m.transpose());
}

Vec3 majority_sign(const Vec3& axis, const Eigen::Ref<const Points>& offsets) {
  const Eigen::RowVectorXd dots = axis.transpose() * offsets;
  const Eigen::Index n = dots.size();
  const Eigen::Index nonneg = (dots.array() >= 0.0).count();
  const Eigen::Index nonpos = (dots.array() <= 0.0).count();
  if (2 * nonneg > n) return axis;
  if (2 * nonpos > n) return -axis;
  return axis;
}

LocalFrame build_lrf(const Patch& patch, const LrfOptions& options) {
  const Mat3 m = weighted_covariance(patch);
  Eigen::SelfAdjointEigenSolver<Mat3> solver(m);
  if (solver.info() != Eigen::Success) throw DegenerateError("eigen decomposition failed");
  const Vec3 eval = solver.eigenvalues();  // ascending
  const double trace = m.trace();
  if (!(trace > 0.0) || eval(1) - eval(0) <= options.tie_tolerance * trace)
    throw DegenerateError("smallest covariance eigenvalues are tied; normal direction is ambiguous");

  const Points offsets = patch.neighbors.colwise() - patch.center;
  const Vec3 z = options.sign_rule(solver.eigenvectors().col(0).normalized(), offsets);

  const Eigen::VectorXd w = patch_weights(patch);
  const Vec3 centroid = offsets * w;
  Vec3 x = centroid - z * z.dot(centroid);
  if (x.norm() < 1e-9 * patch.radius) {
    if (eval(2) - eval(1) <= options.tie_tolerance * trace)
      throw DegenerateError("in-plane direction is ambiguous");
    x = options.sign_rule(solver.eigenvectors().col(2), offsets);
    x -= z * z.dot(x);
  }
  x.normalize();
  const Vec3 y = z.cross(x);

  LocalFrame frame;
  frame.axes.row(0) = x.transpose();
  frame.axes.row(1) = y.transpose();
  frame.axes.row(2) = z.transpose();
  frame.origin = patch.center;
  return frame;
}

LocalFrame fallback_frame(const Vec3& origin) {
  LocalFrame frame;
  frame.origin = origin;
  return frame;
}

Patch to_local(const Patch& patch, const LocalFrame& frame) {
  Patch out;
  out.center = Vec3::Zero();
  out.radius = patch.radius;
  out.neighbors = frame.axes * (patch.neighbors.colwise() - frame.origin);
  return out;
}

}  // namespace spherereg
