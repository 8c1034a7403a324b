#include "spherereg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"

namespace spherereg {

void Thresholds::validate() const {
  if (!(inlier_distance > 0 && inlier_ratio > 0 && rmse > 0 && sr_rte > 0 && sr_rre > 0))
    throw ConfigError("all evaluation thresholds must be positive");
}

std::string Thresholds::header_line() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "# tau1=%.17g tau2=%.17g tau3=%.17g sr_rte=%.17g sr_rre_deg=%.17g", inlier_distance,
                inlier_ratio, rmse, sr_rte, sr_rre / kDegree);
  return buf;
}

CorrespondenceSet gt_correspondences(const PointCloud& p, const PointCloud& q, const RigidTransformd& t_gt,
                                     double tau1) {
  CorrespondenceSet out;
  if (p.empty() || q.empty()) return out;
  const RadiusIndex index(q.points, tau1);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Vec3 moved = t_gt(p.point(i));
    const Eigen::Index j = index.nearest(moved, tau1);
    if (j >= 0) out.push_back(p.point(i), q.point(j), 0.0, i, j);
  }
  return out;
}

double inlier_ratio(const CorrespondenceSet& corr, const RigidTransformd& t_gt, double tau1) {
  if (corr.size() == 0) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < corr.size(); ++i)
    if ((t_gt(corr.source.col(i)) - corr.target.col(i)).norm() < tau1) ++hits;
  return static_cast<double>(hits) / static_cast<double>(corr.size());
}

double fmr(const std::vector<double>& inlier_ratios, double tau2) {
  if (inlier_ratios.empty()) throw ConfigError("fmr of an empty list");
  const auto hits = std::count_if(inlier_ratios.begin(), inlier_ratios.end(), [&](double ir) { return ir > tau2; });
  return static_cast<double>(hits) / static_cast<double>(inlier_ratios.size());
}

double rmse(const CorrespondenceSet& gt_corr, const RigidTransformd& t_est) {
  if (gt_corr.size() == 0) throw DegenerateError("rmse needs at least one ground-truth correspondence");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < gt_corr.size(); ++i)
    sum += (t_est(gt_corr.source.col(i)) - gt_corr.target.col(i)).squaredNorm();
  return std::sqrt(sum / static_cast<double>(gt_corr.size()));
}

double registration_recall(const std::vector<double>& rmses, double tau3) {
  if (rmses.empty()) throw ConfigError("registration recall of an empty list");
  const auto hits = std::count_if(rmses.begin(), rmses.end(), [&](double e) { return e < tau3; });
  return static_cast<double>(hits) / static_cast<double>(rmses.size());
}

double rre(const Mat3& r_est, const Mat3& r_gt) {
  const double c = ((r_est.transpose() * r_gt).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

double rte(const Vec3& t_est, const Vec3& t_gt) { return (t_est - t_gt).norm(); }

double success_rate(const std::vector<PairEvaluation>& evals, double sr_rte, double sr_rre) {
  if (evals.empty()) throw ConfigError("success rate of an empty list");
  const auto hits = std::count_if(evals.begin(), evals.end(),
                                  [&](const PairEvaluation& e) { return e.rte < sr_rte && e.rre < sr_rre; });
  return static_cast<double>(hits) / static_cast<double>(evals.size());
}

PairEvaluation evaluate_pair(const std::string& pair_id, const CorrespondenceSet& predicted,
                             const CorrespondenceSet& gt_corr, const RigidTransformd& t_est,
                             const RigidTransformd& t_gt, const Thresholds& th) {
  PairEvaluation e;
  e.pair_id = pair_id;
  e.inlier_ratio = inlier_ratio(predicted, t_gt, th.inlier_distance);
  e.rmse = rmse(gt_corr, t_est);
  e.rre = rre(t_est.rotation, t_gt.rotation);
  e.rte = rte(t_est.translation, t_gt.translation);
  e.fmr_pass = e.inlier_ratio > th.inlier_ratio;
  e.rr_pass = e.rmse < th.rmse;
  e.sr_pass = e.rte < th.sr_rte && e.rre < th.sr_rre;
  return e;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  sd = std::sqrt(acc / static_cast<double>(v.size()));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MetricSummary summarize(const std::vector<PairEvaluation>& evals, const Thresholds& th) {
  if (evals.empty()) throw ConfigError("no pairs to summarize");
  MetricSummary s;
  s.pairs = evals.size();
  std::vector<double> ir, err, rot, tr;
  for (const auto& e : evals) {
    ir.push_back(e.inlier_ratio);
    err.push_back(e.rmse);
    rot.push_back(e.rre / kDegree);
    tr.push_back(e.rte);
  }
  s.fmr = fmr(ir, th.inlier_ratio);
  s.rr = registration_recall(err, th.rmse);
  s.sr = success_rate(evals, th.sr_rte, th.sr_rre);
  mean_std(ir, s.mean_ir, s.std_ir);
  mean_std(err, s.mean_rmse, s.std_rmse);
  mean_std(rot, s.mean_rre_deg, s.std_rre_deg);
  mean_std(tr, s.mean_rte, s.std_rte);
  s.median_rre_deg = median(rot);
  s.median_rte = median(tr);
  return s;
}

std::string report_csv(const std::vector<PairEvaluation>& evals, const Thresholds& th) {
  std::string out = th.header_line() + "\npair_id,IR,RMSE,RRE_deg,RTE,fmr_pass,rr_pass\n";
  char buf[256];
  for (const auto& e : evals) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g,%d,%d\n", e.inlier_ratio, e.rmse, e.rre / kDegree,
                  e.rte, e.fmr_pass ? 1 : 0, e.rr_pass ? 1 : 0);
    out += e.pair_id + buf;
  }
  return out;
}

std::string summary_json(const MetricSummary& s, const Thresholds& th) {
  nlohmann::ordered_json j;
  j["thresholds"] = {{"tau1", th.inlier_distance},
                     {"tau2", th.inlier_ratio},
                     {"tau3", th.rmse},
                     {"sr_rte", th.sr_rte},
                     {"sr_rre_deg", th.sr_rre / kDegree}};
  j["pairs"] = s.pairs;
  j["FMR"] = s.fmr;
  j["RR"] = s.rr;
  j["SR"] = s.sr;
  j["IR"] = {{"mean", s.mean_ir}, {"std", s.std_ir}};
  j["RMSE"] = {{"mean", s.mean_rmse}, {"std", s.std_rmse}};
  j["RRE_deg"] = {{"mean", s.mean_rre_deg}, {"std", s.std_rre_deg}, {"median", s.median_rre_deg}};
  j["RTE"] = {{"mean", s.mean_rte}, {"std", s.std_rte}, {"median", s.median_rte}};
  return j.dump(2) + "\n";
}

}  // namespace spherereg
