#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "spherereg/metrics.hpp"
#include "spherereg/registration.hpp"

using namespace spherereg;
using namespace testing;

namespace {

DescriptorSet make_set(const Eigen::MatrixXd& desc, std::uint64_t seed) {
  DescriptorSet s;
  s.descriptors = desc;
  s.keypoints = random_points(desc.cols(), seed);
  s.flags.assign(static_cast<std::size_t>(desc.cols()), 0);
  return s;
}

CorrespondenceSet from_points(const Points& src, const Points& dst) {
  CorrespondenceSet c;
  for (Eigen::Index i = 0; i < src.cols(); ++i) c.push_back(src.col(i), dst.col(i), 0.0, i, i);
  return c;
}

}  // namespace

TEST_CASE("mutual matching of identical sets is the identity") {
  const DescriptorSet s = make_set(Eigen::MatrixXd::Random(8, 30), 1);
  const CorrespondenceSet c = match_features(s, s, MatchMode::Mutual);
  REQUIRE(c.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) CHECK(c.target_index[i] == static_cast<Eigen::Index>(i));
}

TEST_CASE("one-hot descriptors recover a permutation") {
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 2, 5, 0, 1, 3, 4;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(6, 6);
  const CorrespondenceSet c = match_features(make_set(eye, 1), make_set(eye * perm, 2), MatchMode::Mutual);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const Eigen::Index j = c.target_index[static_cast<std::size_t>(i)];
    CHECK((eye * perm).col(j) == eye.col(i));
  }
}

TEST_CASE("matching equals an exhaustive search; mutual is a subset") {
  const DescriptorSet a = make_set(Eigen::MatrixXd::Random(5, 40), 3), b = make_set(Eigen::MatrixXd::Random(5, 50), 4);
  const CorrespondenceSet nn = match_features(a, b, MatchMode::Nearest);
  REQUIRE(nn.size() == 40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < 50; ++j)
      if ((a.descriptors.col(i) - b.descriptors.col(j)).norm() < (a.descriptors.col(i) - b.descriptors.col(best)).norm())
        best = j;
    CHECK(nn.target_index[static_cast<std::size_t>(i)] == best);
  }
  const CorrespondenceSet mu = match_features(a, b, MatchMode::Mutual);
  std::set<std::pair<Eigen::Index, Eigen::Index>> all;
  for (Eigen::Index i = 0; i < nn.size(); ++i)
    all.insert({nn.source_index[static_cast<std::size_t>(i)], nn.target_index[static_cast<std::size_t>(i)]});
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    CHECK(all.count({mu.source_index[static_cast<std::size_t>(i)], mu.target_index[static_cast<std::size_t>(i)]}) == 1);
  CHECK_THROWS_AS(match_features(a, DescriptorSet{}, MatchMode::Mutual), ConfigError);
}

TEST_CASE("kabsch recovers a known motion and stays proper") {
  const Points src = random_points(20, 5);
  const RigidTransformd t = random_transform(6);
  const Points dst = (t.rotation * src).colwise() + t.translation;
  const RigidTransformd r = kabsch(src, dst);
  CHECK((r.rotation - t.rotation).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((r.translation - t.translation).norm() < 1e-9);
  CHECK((kabsch(src, src).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  Points mirrored = src;
  mirrored.row(0) *= -1.0;
  const RigidTransformd m = kabsch(src, mirrored);
  CHECK(m.rotation.determinant() == doctest::Approx(1.0));
  // Optimality spot check against random rigid motions.
  auto residual = [&](const RigidTransformd& x) { return ((x.rotation * src).colwise() + x.translation - mirrored).squaredNorm(); };
  for (std::uint64_t s = 0; s < 1000; ++s) CHECK(residual(m) <= residual(random_transform(1000 + s)) + 1e-12);

  Points line(3, 5);
  for (int i = 0; i < 5; ++i) line.col(i) = Vec3(i, 2.0 * i, 0.0);
  CHECK_THROWS_AS(kabsch(line, line), DegenerateError);
}

TEST_CASE("ransac on exact correspondences") {
  const Points src = random_points(50, 7);
  const RigidTransformd t = random_transform(8);
  const CorrespondenceSet c = from_points(src, (t.rotation * src).colwise() + t.translation);
  RansacOptions o;
  o.iterations = 100;
  const RansacResult r = ransac(c, o);
  CHECK(r.inlier_count == 50);
  CHECK((r.transform.matrix() - t.matrix()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(r.best_iteration == 0);
  CHECK_THROWS_AS(ransac(from_points(src.leftCols(2), src.leftCols(2)), o), DegenerateError);
}

TEST_CASE("three correspondences give the direct fit") {
  const Points src = random_points(3, 9);
  const RigidTransformd t = random_transform(10);
  const Points dst = (t.rotation * src).colwise() + t.translation;
  RansacOptions o;
  o.iterations = 20;
  CHECK((ransac(from_points(src, dst), o).transform.matrix() - kabsch(src, dst).matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ransac with 40% outliers") {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Points src = random_points(100, 20 + seed);
    const RigidTransformd t = random_transform(40 + seed);
    Points dst = (t.rotation * src).colwise() + t.translation;
    Rng gen = make_rng(seed, 60);
    for (Eigen::Index i = 60; i < 100; ++i)
      for (int a = 0; a < 3; ++a) dst(a, i) = 2.0 * uniform01(gen) - 1.0;
    RansacOptions o;
    o.seed = seed;
    o.inlier_threshold = 0.01;
    const RansacResult r = ransac(from_points(src, dst), o);
    ok += rre(r.transform.rotation, t.rotation) < kDegree && rte(r.transform.translation, t.translation) < 0.01;
  }
  CHECK(ok >= 19);
}

TEST_CASE("ransac is deterministic across thread counts and monotone in iterations") {
  const Points src = random_points(80, 11);
  const RigidTransformd t = random_transform(12);
  Points dst = (t.rotation * src).colwise() + t.translation;
  dst.rightCols(50) = random_points(50, 13);
  const CorrespondenceSet c = from_points(src, dst);
  RansacOptions o;
  o.iterations = 3000;
  o.seed = 5;
  o.inlier_threshold = 0.05;
  const RansacResult one = ransac(c, o);
  o.threads = 3;
  const RansacResult three = ransac(c, o);
  CHECK(one.transform.matrix() == three.transform.matrix());
  CHECK(one.inliers == three.inliers);
  CHECK(one.best_iteration == three.best_iteration);
  Eigen::Index prev = 0;
  for (std::int64_t it : {1, 10, 100, 1000}) {
    o.iterations = it;
    const Eigen::Index n = ransac(c, o).inlier_count;
    CHECK(n >= prev);
    prev = n;
  }
  CHECK(ransac_sample(5, 17, 80) == ransac_sample(5, 17, 80));
}

TEST_CASE("early exit stops before the budget") {
  const Points src = random_points(60, 14);
  const RigidTransformd t = random_transform(15);
  RansacOptions o;
  o.early_exit = true;
  const RansacResult r = ransac(from_points(src, (t.rotation * src).colwise() + t.translation), o);
  CHECK(r.iterations < o.iterations);
  CHECK(r.inlier_count == 60);
}

TEST_CASE("correspondence CSV round trip") {
  const CorrespondenceSet c = from_points(random_points(7, 16), random_points(7, 17));
  const auto path = temp_path("corr.csv");
  save_correspondences(c, path);
  const CorrespondenceSet r = load_correspondences(path);
  CHECK(r.source == c.source);
  CHECK(r.target == c.target);
}
