#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spherereg/geometry.hpp"
#include "spherereg/io.hpp"

namespace spherereg {

/// Putative point pairs. Column i of `source` is matched with column i of
/// `target`.
struct CorrespondenceSet {
  Points source = Points(3, 0);
  Points target = Points(3, 0);
  Eigen::VectorXd feature_distance;
  std::vector<Eigen::Index> source_index;
  std::vector<Eigen::Index> target_index;

  Eigen::Index size() const { return source.cols(); }
  void push_back(const Vec3& s, const Vec3& t, double dist, Eigen::Index si, Eigen::Index ti);
};

enum class MatchMode { Nearest, Mutual };
MatchMode parse_match_mode(const std::string& name);
std::string to_string(MatchMode mode);

/// Euclidean nearest neighbors in descriptor space; ties go to the lower
/// index. Mutual mode keeps only pairs that are nearest in both directions.
CorrespondenceSet match_features(const DescriptorSet& source, const DescriptorSet& target,
                                 MatchMode mode = MatchMode::Mutual);

/// Least-squares rigid fit of src onto dst (Kabsch, reflection corrected).
/// Throws DegenerateError for fewer than 3 points or collinear input.
RigidTransformd kabsch(const Eigen::Ref<const Points>& src, const Eigen::Ref<const Points>& dst);

struct RansacOptions {
  std::int64_t iterations = 50000;
  double inlier_threshold = 0.1;
  std::uint64_t seed = 0;
  int threads = 1;
  // Stop once the hypothesis count reaches the standard bound for this
  // confidence. Off by default: the iteration budget is fixed.
  bool early_exit = false;
  double confidence = 0.999;
};

struct RansacResult {
  RigidTransformd transform;
  std::vector<Eigen::Index> inliers;  // consensus set of the best hypothesis
  Eigen::Index inlier_count = 0;
  std::int64_t iterations = 0;
  std::int64_t best_iteration = -1;
  std::uint64_t seed = 0;
};

/// The three distinct correspondence indices drawn at a given iteration;
/// depends only on (seed, iteration, count).
std::array<Eigen::Index, 3> ransac_sample(std::uint64_t seed, std::int64_t iteration, Eigen::Index count);

/// Fixed-budget RANSAC over 3-point Kabsch hypotheses. The winner maximizes
/// the inlier count (earliest iteration on ties) and is refit on its
/// consensus set. Throws DegenerateError when no hypothesis is valid.
RansacResult ransac(const CorrespondenceSet& corr, const RansacOptions& options = {});

/// CSV "src_x,src_y,src_z,dst_x,dst_y,dst_z,feat_dist".
void save_correspondences(const CorrespondenceSet& corr, const std::filesystem::path& path);
CorrespondenceSet load_correspondences(const std::filesystem::path& path);

}  // namespace spherereg
