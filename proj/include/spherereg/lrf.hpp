#pragma once

#include <functional>

#include "spherereg/geometry.hpp"

namespace spherereg {

/// Orthonormal local frame. Rows of `axes` are the x, y and z axes expressed
/// in world coordinates; `origin` is the superpoint.
struct LocalFrame {
  Mat3 axes = Mat3::Identity();
  Vec3 origin = Vec3::Zero();

  bool is_valid(double tol = 1e-9) const {
    return (axes * axes.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(axes.determinant() - 1.0) <= tol;
  }
};

/// Distance-weighted scatter of the neighbors about the patch center:
/// M = sum_j w_j (p_j - c)(p_j - c)^T, w_j = (R - d_j) / sum_k (R - d_k).
/// Throws DegenerateError for fewer than 3 neighbors or zero total weight.
Mat3 weighted_covariance(const Patch& patch);

/// Chooses the sign of a candidate axis from the neighbor offsets.
using SignRule = std::function<Vec3(const Vec3& axis, const Eigen::Ref<const Points>& offsets)>;

/// Flips `axis` so that strictly more than half of the offsets have a
/// non-negative projection on it; leaves it unchanged when neither sign wins.
Vec3 majority_sign(const Vec3& axis, const Eigen::Ref<const Points>& offsets);

struct LrfOptions {
  double tie_tolerance = 1e-9;  // relative to trace(M)
  SignRule sign_rule = majority_sign;
};

/// z = eigenvector of the smallest eigenvalue of the weighted covariance,
/// x = normalized projection of the weighted centroid onto the plane normal
/// to z (largest-eigenvalue eigenvector when that projection vanishes),
/// y = z cross x. Throws DegenerateError on eigenvalue ties.
LocalFrame build_lrf(const Patch& patch, const LrfOptions& options = {});

/// Frame aligned with the world axes; used when build_lrf fails.
LocalFrame fallback_frame(const Vec3& origin);

/// Expresses the neighbors relative to the frame: q_j = axes (p_j - origin).
/// The returned patch is centered at the origin.
Patch to_local(const Patch& patch, const LocalFrame& frame);

}  // namespace spherereg
