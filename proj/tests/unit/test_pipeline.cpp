#include "doctest.h"
#include "helpers.hpp"
#include "spherereg/bench.hpp"
#include "spherereg/svg.hpp"

using namespace spherereg;
using namespace testing;

TEST_CASE("presets follow the hyperparameter table") {
  const PipelineConfig a = make_preset("3dmatch");
  CHECK(a.encoder.voxel.radial_bins == 15);
  CHECK(a.encoder.voxel.elevation_bins == 20);
  CHECK(a.encoder.voxel.azimuth_bins == 40);
  CHECK(a.encoder.voxel.radius == 0.3);
  CHECK(!a.encoder.msf);
  CHECK(make_preset("kitti").encoder.voxel.radius == 2.0);
  const PipelineConfig e = make_preset("3dmatch-to-eth");
  CHECK(e.encoder.voxel.radius == 1.2);
  CHECK(e.encoder.msf);
  CHECK(make_preset("3dmatch-to-kitti").encoder.voxel.radius == 3.0);
  CHECK(make_preset("3dmatch-to-kitti").encoder.msf);
  CHECK(a.ransac.iterations == 50000);
  CHECK_THROWS_AS(make_preset("modelnet"), ConfigError);
}

TEST_CASE("config text round trips and presets apply first") {
  const PipelineConfig c = parse_config("radius = 0.5   # override\n\npreset = 3dmatch-to-eth\nchannels = 4, 8\n");
  CHECK(c.preset == "3dmatch-to-eth");
  CHECK(c.encoder.voxel.radius == 0.5);
  CHECK(c.encoder.msf);
  CHECK(c.channels == std::vector<int>{4, 8});
  CHECK(parse_config(c.to_text()).to_text() == c.to_text());
  CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("radius = wide\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("radius\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("preset = 3dmatch-to-eth\nradial_bins = 10\n"), ConfigError);
}

TEST_CASE("self-registration recovers the identity") {
  PipelineConfig c = make_preset("desk");
  c.keypoints = 300;
  c.ransac.iterations = 2000;
  c.threads = 1;
  SynthOptions o;
  o.points_per_cloud = 3000;
  const SynthPair s = synth_pair(1, o);
  const NetworkWeights w = init_weights(0, c.arch());
  const DescriptorSet d = describe_cloud(c, s.p, w);
  CHECK(d.weights_hash == weights_hash(w));
  const RegistrationOutcome r = register_descriptors(c, d, d);
  CHECK((r.ransac.transform.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("description does not depend on the thread count") {
  PipelineConfig c = make_preset("desk");
  c.keypoints = 64;
  SynthOptions o;
  o.points_per_cloud = 2000;
  const SynthPair s = synth_pair(2, o);
  const NetworkWeights w = init_weights(0, c.arch());
  c.threads = 1;
  const DescriptorSet a = describe_cloud(c, s.p, w);
  c.threads = 4;
  const DescriptorSet b = describe_cloud(c, s.p, w);
  CHECK(a.descriptors == b.descriptors);
  CHECK(a.keypoints == b.keypoints);
}

TEST_CASE("invariance suite on fresh weights") {
  PipelineConfig c = make_preset("desk");
  c.threads = 1;
  c.synth.points_per_cloud = 3000;
  const InvarianceReport r = invariance_suite(c, init_weights(0, c.arch()), 10, 3, 1);
  CHECK(r.patches == 10);
  CHECK(r.max_rotation_error <= 1e-3);
  CHECK(r.max_shift_error <= 1e-6);
}

TEST_CASE("svg chart is well formed") {
  const std::string s = line_chart_svg("t<1>", "x", "y", {{"a", {0, 1, 2}, {1, 0.5, 0.25}}});
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find("t&lt;1&gt;") != std::string::npos);
  CHECK(s.find("polyline") != std::string::npos);
}
