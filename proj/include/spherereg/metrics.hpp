#pragma once

#include <string>
#include <vector>

#include "spherereg/geometry.hpp"
#include "spherereg/registration.hpp"

namespace spherereg {

constexpr double kDegree = 3.14159265358979323846 / 180.0;

struct Thresholds {
  double inlier_distance = 0.1;   // tau1
  double inlier_ratio = 0.05;     // tau2
  double rmse = 0.2;              // tau3
  double sr_rte = 2.0;
  double sr_rre = 5.0 * kDegree;  // radians

  void validate() const;
  std::string header_line() const;  // "# tau1=... tau2=..." for reports
};

/// Pairs (p_i, q_j) with q_j the nearest neighbor of T_gt(p_i) in Q and
/// |T_gt(p_i) - q_j| <= tau1. Source columns hold the untransformed p_i.
CorrespondenceSet gt_correspondences(const PointCloud& p, const PointCloud& q, const RigidTransformd& t_gt,
                                     double tau1);

/// Fraction of pairs with |T(p) - q| < tau1 (strict). Empty set -> 0.
double inlier_ratio(const CorrespondenceSet& corr, const RigidTransformd& t_gt, double tau1);

/// Fraction of pairs with IR > tau2 (strict). Throws on an empty list.
double fmr(const std::vector<double>& inlier_ratios, double tau2);

/// RMS residual of the estimated transform over ground-truth pairs.
double rmse(const CorrespondenceSet& gt_corr, const RigidTransformd& t_est);

/// Fraction with RMSE < tau3 (strict). Throws on an empty list.
double registration_recall(const std::vector<double>& rmses, double tau3);

/// Geodesic angle between rotations, radians.
double rre(const Mat3& r_est, const Mat3& r_gt);
double rte(const Vec3& t_est, const Vec3& t_gt);

struct PairEvaluation {
  std::string pair_id;
  double inlier_ratio = 0.0;
  double rmse = 0.0;
  double rre = 0.0;  // radians
  double rte = 0.0;
  bool fmr_pass = false;
  bool rr_pass = false;
  bool sr_pass = false;
};

/// Fraction with RTE < sr_rte and RRE < sr_rre (strict). Throws on empty.
double success_rate(const std::vector<PairEvaluation>& evals, double sr_rte, double sr_rre);

/// All per-pair metrics. `predicted` are the matched descriptor pairs,
/// `gt_corr` the ground-truth correspondences.
PairEvaluation evaluate_pair(const std::string& pair_id, const CorrespondenceSet& predicted,
                             const CorrespondenceSet& gt_corr, const RigidTransformd& t_est,
                             const RigidTransformd& t_gt, const Thresholds& th);

struct MetricSummary {
  std::size_t pairs = 0;
  double fmr = 0.0;
  double rr = 0.0;
  double sr = 0.0;
  double mean_ir = 0.0, std_ir = 0.0;
  double mean_rmse = 0.0, std_rmse = 0.0;
  double mean_rre_deg = 0.0, std_rre_deg = 0.0, median_rre_deg = 0.0;
  double mean_rte = 0.0, std_rte = 0.0, median_rte = 0.0;
};

MetricSummary summarize(const std::vector<PairEvaluation>& evals, const Thresholds& th);

/// CSV "pair_id,IR,RMSE,RRE_deg,RTE,fmr_pass,rr_pass" preceded by the
/// threshold header line.
std::string report_csv(const std::vector<PairEvaluation>& evals, const Thresholds& th);
/// JSON object with thresholds and summary.
std::string summary_json(const MetricSummary& s, const Thresholds& th);

}  // namespace spherereg
