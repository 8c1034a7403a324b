#include "doctest.h"
#include "helpers.hpp"
#include "spherereg/lrf.hpp"

using namespace spherereg;
using namespace testing;

TEST_CASE("weighted covariance equals the explicit sum") {
  Patch p = bumpy_patch(1, 50);
  p.center = Vec3(0.01, -0.02, 0.0);
  double total = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) total += p.radius - (p.neighbors.col(j) - p.center).norm();
  Mat3 expect = Mat3::Zero();
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const Vec3 d = p.neighbors.col(j) - p.center;
    expect += (p.radius - d.norm()) / total * d * d.transpose();
  }
  const Mat3 m = weighted_covariance(p);
  CHECK((m - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(m == m.transpose());
}

TEST_CASE("mirror-symmetric neighbors give zero xy and xz terms") {
  Patch p = bumpy_patch(2, 40);
  Points both(3, 2 * p.size());
  both << p.neighbors, p.neighbors;
  both.row(0).tail(p.size()) *= -1.0;
  p.neighbors = both;
  const Mat3 m = weighted_covariance(p);
  CHECK(std::abs(m(0, 1)) < 1e-12);
  CHECK(std::abs(m(0, 2)) < 1e-12);
}

TEST_CASE("frame is orthonormal and right-handed") {
  const LocalFrame f = build_lrf(bumpy_patch(3));
  CHECK(f.is_valid(1e-12));
  CHECK((f.axes.row(0).cross(f.axes.row(1)) - f.axes.row(2)).norm() < 1e-12);
}

TEST_CASE("frame rotates with the patch") {
  const Patch p = bumpy_patch(4);
  const LocalFrame f = build_lrf(p);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RigidTransformd t = random_transform(100 + s);
    Patch q = p;
    q.center = t(p.center);
    q.neighbors = (t.rotation * p.neighbors).colwise() + t.translation;
    const LocalFrame g = build_lrf(q);
    CHECK((g.axes - f.axes * t.rotation.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    // Local coordinates are unchanged.
    CHECK((to_local(q, g).neighbors - to_local(p, f).neighbors).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("majority sign rule") {
  Points off(3, 3);
  off << 0, 0, 0, 0, 0, 0, 1, 1, -1;
  CHECK(majority_sign(Vec3::UnitZ(), off) == Vec3::UnitZ());
  CHECK(majority_sign(-Vec3::UnitZ(), off) == Vec3::UnitZ());
  Points tie(3, 2);
  tie << 0, 0, 0, 0, 1, -1;
  CHECK(majority_sign(-Vec3::UnitZ(), tie) == -Vec3::UnitZ());
}

TEST_CASE("degenerate patches throw") {
  Patch few;
  few.radius = 1.0;
  few.neighbors = Points::Random(3, 2) * 0.1;
  CHECK_THROWS_AS(build_lrf(few), DegenerateError);
  Patch line;
  line.radius = 1.0;
  line.neighbors.resize(3, 20);
  for (int i = 0; i < 20; ++i) line.neighbors.col(i) = Vec3(0.04 * (i - 10) + 0.01, 0, 0);
  CHECK_THROWS_AS(build_lrf(line), DegenerateError);
}
