#include "../common/metric_oracles.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace spherereg;
using namespace testing;

namespace {

CorrespondenceSet noisy_pairs(const RigidTransformd& t, Eigen::Index n, double spread, std::uint64_t seed) {
  const Points src = random_points(n, seed);
  Points dst = (t.rotation * src).colwise() + t.translation;
  dst += random_points(n, seed + 1, spread);
  CorrespondenceSet c;
  for (Eigen::Index i = 0; i < n; ++i) c.push_back(src.col(i), dst.col(i), 0.0, i, i);
  return c;
}

}  // namespace

TEST_CASE("inlier ratio examples and strictness") {
  CorrespondenceSet c;
  c.push_back(Vec3::Zero(), Vec3(0.05, 0, 0), 0, 0, 0);
  c.push_back(Vec3::Zero(), Vec3(0.1, 0, 0), 0, 1, 1);
  c.push_back(Vec3::Zero(), Vec3(0.2, 0, 0), 0, 2, 2);
  c.push_back(Vec3::Zero(), Vec3(0, 0.01, 0), 0, 3, 3);
  CHECK(inlier_ratio(c, RigidTransformd{}, 0.1) == 0.5);
  CHECK(inlier_ratio(CorrespondenceSet{}, RigidTransformd{}, 0.1) == 0.0);
}

TEST_CASE("fmr, rr and sr follow strict thresholds") {
  CHECK(fmr({0.06, 0.04}, 0.05) == 0.5);
  CHECK(fmr({0.05}, 0.05) == 0.0);
  CHECK_THROWS(fmr({}, 0.05));
  CHECK(registration_recall({0.0, 0.0}, 0.2) == 1.0);
  CHECK(registration_recall({0.2, 0.1}, 0.2) == 0.5);
  PairEvaluation ok, far;
  far.rte = 3.0;
  CHECK(success_rate({ok, far}, 2.0, 5 * kDegree) == 0.5);
}

TEST_CASE("rre and rte examples") {
  const Mat3 rz = Eigen::AngleAxisd(EIGEN_PI / 2, Vec3::UnitZ()).toRotationMatrix();
  CHECK(rre(rz, Mat3::Identity()) == doctest::Approx(EIGEN_PI / 2).epsilon(1e-12));
  CHECK(rre(rz, rz) == 0.0);
  CHECK(rte(Vec3(1, 0, 0), Vec3::Zero()) == 1.0);
  // Rounding slightly past +-1 still yields a number.
  CHECK(std::isfinite(rre(Mat3::Identity() * (1 + 1e-15), Mat3::Identity())));
}

TEST_CASE("rmse uses the estimate over ground-truth pairs") {
  CorrespondenceSet c;
  for (int i = 0; i < 5; ++i) c.push_back(Vec3(i, 0, 0), Vec3(i, 0.1, 0), 0, i, i);
  CHECK(rmse(c, RigidTransformd{}) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rmse(c, RigidTransformd(Mat3::Identity(), Vec3(0, 0.1, 0))) < 1e-12);
}

TEST_CASE("metrics equal loop oracles on random instances") {
  std::vector<double> irs, rmses, rres, rtes;
  std::vector<PairEvaluation> evals;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const RigidTransformd gt = random_transform(200 + s), est = compose(random_transform(400 + s, 0.05), gt);
    const CorrespondenceSet c = noisy_pairs(gt, 40, 0.15, 600 + s);
    const double ir = inlier_ratio(c, gt, 0.1);
    CHECK(ir == oracle::inlier_ratio(c, gt.matrix(), 0.1));
    const double e = rmse(c, est);
    CHECK(std::abs(e - oracle::rmse(c, est.matrix())) <= 1e-12);
    const double a = rre(est.rotation, gt.rotation);
    CHECK(std::abs(a - oracle::rre(est.rotation, gt.rotation)) <= 1e-9);
    CHECK(a == doctest::Approx(rre(gt.rotation, est.rotation)).epsilon(1e-12));
    const double b = rte(est.translation, gt.translation);
    CHECK(std::abs(b - oracle::rte(est.translation, gt.translation)) <= 1e-12);
    irs.push_back(ir), rmses.push_back(e), rres.push_back(a), rtes.push_back(b);
    PairEvaluation pe;
    pe.rre = a, pe.rte = b;
    evals.push_back(pe);
  }
  CHECK(fmr(irs, 0.5) == oracle::fraction_above(irs, 0.5));
  CHECK(registration_recall(rmses, 0.05) == oracle::fraction_below(rmses, 0.05));
  CHECK(success_rate(evals, 0.05, 2 * kDegree) == oracle::success_rate(rtes, rres, 0.05, 2 * kDegree));
}

TEST_CASE("ground-truth correspondences equal a double loop") {
  const RigidTransformd t = random_transform(3);
  const PointCloud p(random_points(300, 4));
  PointCloud q = apply_transform(PointCloud(random_points(300, 4)), t);
  q.points += random_points(300, 5, 0.08);
  const CorrespondenceSet c = gt_correspondences(p, q, t, 0.1);
  const auto expect = oracle::gt_pairs(p.points, q.points, t.matrix(), 0.1);
  REQUIRE(static_cast<std::size_t>(c.size()) == expect.size());
  for (std::size_t k = 0; k < expect.size(); ++k) {
    CHECK(c.source_index[k] == expect[k].first);
    CHECK(c.target_index[k] == expect[k].second);
  }
  CHECK(gt_correspondences(p, apply_transform(p, RigidTransformd(Mat3::Identity(), Vec3(50, 0, 0))), t, 0.1).size() == 0);
}

TEST_CASE("ratios are invariant to a common rigid motion") {
  const RigidTransformd gt = random_transform(7), est = compose(random_transform(8, 0.05), gt), g = random_transform(9, 3.0);
  const CorrespondenceSet c = noisy_pairs(gt, 60, 0.15, 10);
  CorrespondenceSet moved;
  for (Eigen::Index i = 0; i < c.size(); ++i) moved.push_back(g(c.source.col(i)), g(c.target.col(i)), 0, i, i);
  const RigidTransformd gt2 = g * gt * g.inverse(), est2 = g * est * g.inverse();
  CHECK(inlier_ratio(moved, gt2, 0.1) == inlier_ratio(c, gt, 0.1));
  CHECK(rmse(moved, est2) == doctest::Approx(rmse(c, est)).epsilon(1e-9));
}

TEST_CASE("reports echo the thresholds") {
  Thresholds th;
  th.inlier_distance = 0.25;
  PairEvaluation e;
  e.pair_id = "a";
  const std::string csv = report_csv({e}, th);
  CHECK(csv.find("tau1=0.25") != std::string::npos);
  CHECK(csv.find("pair_id,IR,RMSE,RRE_deg,RTE,fmr_pass,rr_pass") != std::string::npos);
  CHECK(summary_json(summarize({e}, th), th).find("\"tau1\": 0.25") != std::string::npos);
}
