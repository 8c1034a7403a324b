#include "doctest.h"
#include "helpers.hpp"
#include "spherereg/scnn.hpp"

using namespace spherereg;
using namespace testing;

namespace {

Tensor4d random_tensor(const Tensor4d::Shape& s, std::uint64_t seed) {
  Tensor4d t(s);
  Rng gen = make_rng(seed, 3);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = 2.0 * uniform01(gen) - 1.0;
  return t;
}

// Direct loops; azimuth indices wrap (spherical) or read zero (zero padding).
Tensor4d naive_conv(const Tensor4d& in, const ConvLayer& l, bool circular) {
  const auto& s = l.spec;
  const Eigen::Index K = in.azimuth(), half = s.kernel_azimuth / 2;
  const Eigen::Index n_out = (in.radial() - s.kernel_radial) / s.stride_radial + 1;
  const Eigen::Index m_out = (in.elevation() - s.kernel_elevation) / s.stride_elevation + 1;
  Tensor4d out(s.out_channels, n_out, m_out, K);
  for (int o = 0; o < s.out_channels; ++o)
    for (Eigen::Index n = 0; n < n_out; ++n)
      for (Eigen::Index m = 0; m < m_out; ++m)
        for (Eigen::Index k = 0; k < K; ++k) {
          double acc = l.bias(o);
          for (int d = 0; d < l.in_channels; ++d)
            for (int r = 0; r < s.kernel_radial; ++r)
              for (int t = 0; t < s.kernel_elevation; ++t)
                for (int f = 0; f < s.kernel_azimuth; ++f) {
                  Eigen::Index kk = k + f - half;
                  if (circular)
                    kk = ((kk % K) + K) % K;
                  else if (kk < 0 || kk >= K)
                    continue;
                  acc += l.weight(o, d, r, t, f) * in(d, n * s.stride_radial + r, m * s.stride_elevation + t, kk);
                }
          out(o, n, m, k) = acc;
        }
  return out;
}

ArchConfig toy_arch(PaddingMode padding = PaddingMode::Spherical) {
  ArchConfig a;
  a.input_channels = 2;
  a.input_shape = {4, 5, 6};
  LayerSpec l1;
  l1.out_channels = 3;
  LayerSpec l2;
  l2.out_channels = 4;
  l2.kernel_radial = 2;
  l2.kernel_elevation = 1;
  l2.stride_elevation = 2;
  a.layers = {l1, l2};
  a.descriptor_dim = 5;
  a.padding = padding;
  return a;
}

}  // namespace

TEST_CASE("convolution matches direct loops") {
  const NetworkWeights w = init_weights(1, toy_arch());
  const Tensor4d x = random_tensor({2, 4, 5, 6}, 2);
  const ConvLayer& l = w.layers[0];
  CHECK(max_abs_diff(sconv_forward(pad_spherical(x, 1), l).data(), naive_conv(x, l, true).data()) < 1e-12);
  CHECK(max_abs_diff(sconv_forward(pad_zero(x, 1), l).data(), naive_conv(x, l, false).data()) < 1e-12);
  const ConvLayer& l2 = w.layers[1];
  const Tensor4d h = random_tensor({3, 2, 3, 6}, 3);
  CHECK(max_abs_diff(sconv_forward(pad_spherical(h, 1), l2).data(), naive_conv(h, l2, true).data()) < 1e-12);
}

TEST_CASE("spherical convolution commutes with azimuth shifts") {
  const NetworkWeights w = init_weights(4, toy_arch());
  const Tensor4d x = random_tensor({2, 4, 5, 6}, 5);
  const ConvLayer& l = w.layers[0];
  double sph = 0.0, zero = 0.0;
  for (int j = 1; j < 6; ++j) {
    const Tensor4d a = sconv_forward(pad_spherical(shift_azimuth(x, j), 1), l);
    const Tensor4d b = shift_azimuth(sconv_forward(pad_spherical(x, 1), l), j);
    sph = std::max(sph, max_abs_diff(a.data(), b.data()));
    const Tensor4d c = sconv_forward(pad_zero(shift_azimuth(x, j), 1), l);
    const Tensor4d d = shift_azimuth(sconv_forward(pad_zero(x, 1), l), j);
    zero = std::max(zero, max_abs_diff(c.data(), d.data()));
  }
  CHECK(sph <= 1e-9);
  CHECK(zero > 1e-3);
}

TEST_CASE("descriptor ignores azimuth shifts of the input") {
  const NetworkWeights w = init_weights(6, toy_arch());
  const Tensor4d x = random_tensor({2, 4, 5, 6}, 7);
  const Descriptor d = forward(x, w);
  CHECK(d.norm() == doctest::Approx(1.0));
  for (int j = 1; j < 6; ++j) CHECK(max_abs_diff(forward(shift_azimuth(x, j), w), d) <= 1e-12);
}

TEST_CASE("padding and its gradient fold are adjoint") {
  const Tensor4d x = random_tensor({2, 3, 4, 7}, 8);
  const Tensor4d g = random_tensor({2, 3, 4, 11}, 9);
  for (PaddingMode mode : {PaddingMode::Spherical, PaddingMode::Zero}) {
    const double lhs = pad_azimuth(x, 2, mode).data().dot(g.data());
    const double rhs = x.data().dot(unpad_azimuth_grad(g, 2, mode).data());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("network gradients match central differences") {
  for (PaddingMode mode : {PaddingMode::Spherical, PaddingMode::Zero}) {
    NetworkWeights w = init_weights(10, toy_arch(mode));
    const Tensor4d x = random_tensor({2, 4, 5, 6}, 11);
    Rng gen = make_rng(12);
    Eigen::VectorXd up(5);
    for (int i = 0; i < 5; ++i) up(i) = standard_normal(gen);
    const NetworkGradients g = backward(x, w, up);

    const Eigen::VectorXd p0 = w.flatten();
    Eigen::VectorXd fd(p0.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
      Eigen::VectorXd p = p0;
      p(i) += h;
      w.unflatten(p);
      const double fp = up.dot(forward(x, w));
      p(i) -= 2 * h;
      w.unflatten(p);
      fd(i) = (fp - up.dot(forward(x, w))) / (2 * h);
    }
    w.unflatten(p0);
    CHECK((g.parameters - fd).cwiseAbs().maxCoeff() <= 1e-4 * fd.cwiseAbs().maxCoeff());

    Eigen::VectorXd fdx(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Tensor4d a = x, b = x;
      a.data()[i] += h;
      b.data()[i] -= h;
      fdx(i) = (up.dot(forward(a, w)) - up.dot(forward(b, w))) / (2 * h);
    }
    CHECK((g.input.data() - fdx).cwiseAbs().maxCoeff() <= 1e-4 * fdx.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("default architecture chains for the table grid") {
  const ArchConfig a = default_arch(VoxelParams{15, 20, 40, 0.3}, false);
  const auto shapes = a.layer_shapes();
  REQUIRE(shapes.size() == 4);
  CHECK(shapes.back()[0] == 128);
  CHECK(shapes.back()[3] == 40);
  const ArchConfig m = default_arch(VoxelParams{15, 20, 40, 1.2}, true);
  CHECK(m.input_tensor_shape() == Tensor4d::Shape{3, 5, 20, 40});
  CHECK(ArchConfig::from_json(a.to_json()) == a);
}

TEST_CASE("weights serialize to float32 and back") {
  const NetworkWeights w = init_weights(13, toy_arch());
  CHECK(init_weights(13, toy_arch()).flatten() == w.flatten());
  const NetworkWeights r = deserialize_weights(serialize_weights(w));
  CHECK(r.arch == w.arch);
  CHECK(r.flatten() == w.flatten().cast<float>().cast<double>());
  std::string bytes = serialize_weights(w);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize_weights(bytes), ParseError);
}
