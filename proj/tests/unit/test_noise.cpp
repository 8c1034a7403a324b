#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "spherereg/noise.hpp"

using namespace spherereg;
using namespace testing;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * EIGEN_PI); }

}  // namespace

TEST_CASE("clipped gaussian stays in bounds and matches the censored-normal moment") {
  const PointCloud zero(Points::Zero(3, 333334));
  const PointCloud noisy = gaussian_clipped(zero, 0.05, 0.05, 1);
  CHECK(noisy.points.cwiseAbs().maxCoeff() <= 0.05);
  // X = clamp(sigma Z, -c, c) with a = c / sigma.
  const double sigma = 0.05, c = 0.05, a = c / sigma;
  const double second = sigma * sigma * ((2 * normal_cdf(a) - 1) - 2 * a * normal_pdf(a)) + 2 * c * c * (1 - normal_cdf(a));
  const double empirical = std::sqrt(noisy.points.array().square().mean());
  CHECK(std::abs(empirical - std::sqrt(second)) <= 0.02 * std::sqrt(second));
  CHECK(gaussian_clipped(zero, 1e-12, 0.05, 1).points.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(gaussian_clipped(zero, 0.05, 0.05, 1).points == noisy.points);
}

TEST_CASE("uniform noise bounds and mean") {
  const PointCloud zero(Points::Zero(3, 333334));
  const PointCloud noisy = uniform_noise(zero, 0.05, 2);
  CHECK(noisy.points.cwiseAbs().maxCoeff() <= 0.05);
  const double n = static_cast<double>(noisy.points.size());
  const double sd = 0.05 / std::sqrt(3.0);
  CHECK(std::abs(noisy.points.mean()) <= 3 * sd / std::sqrt(n));
}

TEST_CASE("outlier replacement count and untouched points") {
  const PointCloud cloud(random_points(1000, 3));
  const PointCloud out = replace_outliers(cloud, 0.05, 0.5, 4);
  int changed = 0;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) changed += (out.point(i) != cloud.point(i));
  CHECK(changed == 50);
  CHECK(replace_outliers(cloud, 0.07, 0.5, 4).size() == 1000);
}

TEST_CASE("range noise moves points along their rays") {
  PointCloud cloud(random_points(2000, 5, 3.0));
  cloud.points.col(0).setZero();
  const Vec3 origin = Vec3::Zero();
  const PointCloud out = range_noise(cloud, origin, 0.05, 6);
  CHECK(out.point(0) == Vec3::Zero());
  std::vector<double> deltas;
  for (Eigen::Index i = 1; i < cloud.size(); ++i) {
    const Vec3 a = cloud.point(i).normalized(), b = out.point(i).normalized();
    CHECK((a - b).norm() < 1e-9);
    deltas.push_back(out.point(i).norm() - cloud.point(i).norm());
  }
  double mx = 0.0;
  for (double d : deltas) mx = std::max(mx, std::abs(d));
  CHECK(mx <= 0.15 + 1e-12);
  double sq = 0.0;
  for (double d : deltas) sq += d * d;
  const double a = 3.0, sigma = 0.05;
  const double second = sigma * sigma * ((2 * normal_cdf(a) - 1) - 2 * a * normal_pdf(a)) + 2 * 9 * sigma * sigma * (1 - normal_cdf(a));
  CHECK(std::abs(std::sqrt(sq / deltas.size()) - std::sqrt(second)) <= 0.05 * std::sqrt(second));
}

TEST_CASE("noise spec strings") {
  const NoiseSpec s = parse_noise_spec("kind=gaussian_clipped,sigma=0.05,clip=0.05,seed=7");
  CHECK(s.kind == NoiseKind::GaussianClipped);
  CHECK(s.seed == 7);
  CHECK(parse_noise_spec(s.to_string()).to_string() == s.to_string());
  CHECK_THROWS_AS(parse_noise_spec("kind=speckle"), ConfigError);
  CHECK_THROWS_AS(parse_noise_spec("kind=replace_outliers,fraction=1.5"), ConfigError);
  CHECK_THROWS_AS(parse_noise_spec("sigma"), ConfigError);
}
