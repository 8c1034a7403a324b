#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "spherereg/io.hpp"

using namespace spherereg;
using namespace testing;

TEST_CASE("ascii PLY with extra properties and elements") {
  const std::string text =
      "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\n"
      "property float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\n"
      "end_header\n0 0 0 255\n1 2 3 0\n-1.5 0.25 4 7\n3 0 1 2\n";
  LoadReport report;
  const PointCloud c = parse_point_cloud(text, CloudFormat::PlyAscii, &report);
  REQUIRE(c.size() == 3);
  CHECK(c.point(2) == Vec3(-1.5, 0.25, 4.0));
  CHECK(!report.warnings.empty());
}

TEST_CASE("binary PLY round trip is exact") {
  PointCloud c(random_points(257, 3, 10.0));
  const auto path = temp_path("round.ply");
  save_point_cloud(c, path, CloudFormat::PlyBinaryLE);
  CHECK(detect_cloud_format(path) == CloudFormat::PlyBinaryLE);
  CHECK(load_point_cloud(path).points == c.points);
  save_point_cloud(c, path, CloudFormat::PlyAscii);
  CHECK(load_point_cloud(path).points == c.points);
}

TEST_CASE("float32 binary vertices are read") {
  std::string bytes = "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\n"
                      "property float y\nproperty float z\nend_header\n";
  const float v[6] = {1.5f, -2.0f, 0.25f, 3.0f, 4.0f, 5.0f};
  bytes.append(reinterpret_cast<const char*>(v), sizeof v);
  const PointCloud c = parse_point_cloud(bytes, CloudFormat::PlyBinaryLE);
  REQUIRE(c.size() == 2);
  CHECK(c.point(0) == Vec3(1.5, -2.0, 0.25));
}

TEST_CASE("truncated binary PLY reports a byte offset") {
  std::string bytes = "ply\nformat binary_little_endian 1.0\nelement vertex 4\nproperty double x\n"
                      "property double y\nproperty double z\nend_header\n";
  const std::size_t header = bytes.size();
  bytes.append(40, '\0');
  try {
    parse_point_cloud(bytes, CloudFormat::PlyBinaryLE);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() >= header);
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
}

TEST_CASE("xyz text and non-finite rejection") {
  const PointCloud c = parse_point_cloud("0 1 2\n3 4 5\n\n6 7 8\n", CloudFormat::XyzText);
  CHECK(c.size() == 3);
  CHECK_THROWS_AS(parse_point_cloud("0 1\n", CloudFormat::XyzText), ParseError);
  PointCloud bad(random_points(3, 1));
  bad.points(1, 1) = std::nan("");
  CHECK_THROWS(save_point_cloud(bad, temp_path("bad.ply"), CloudFormat::PlyBinaryLE));
}

TEST_CASE("transform text round trip") {
  const RigidTransformd t = random_transform(8);
  const auto path = temp_path("t.txt");
  save_transform(t, path);
  CHECK((load_transform(path).matrix() - t.matrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("descriptor file round trip") {
  DescriptorSet s;
  s.keypoints = random_points(5, 2);
  s.descriptors = Eigen::MatrixXd::Random(8, 5);
  s.flags = {0, 1, 0, 0, 1};
  s.weights_hash = 0x1234abcdULL;
  const auto path = temp_path("d.sdsc");
  save_descriptors(s, path);
  const DescriptorSet r = load_descriptors(path);
  CHECK(r.keypoints == s.keypoints);
  CHECK(r.descriptors == s.descriptors);
  CHECK(r.flags == s.flags);
  CHECK(r.weights_hash == s.weights_hash);
  CHECK_THROWS_AS(load_descriptors(temp_path("missing.sdsc")), IoError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(255) == "00000000000000ff");
}
