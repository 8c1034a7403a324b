#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "spherereg/metrics.hpp"
#include "spherereg/training.hpp"

using namespace spherereg;
using namespace testing;

namespace {

Eigen::MatrixXd unit_columns(Eigen::Index dim, Eigen::Index n, std::uint64_t seed) {
  Rng gen = make_rng(seed, 1);
  Eigen::MatrixXd m(dim, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(gen);
  m.colwise().normalize();
  return m;
}

}  // namespace

TEST_CASE("loss is zero when margins are met") {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(4, 4) * 1.0;
  const LossResult r = contrastive_loss(p, p, 0.1, 1.4);
  CHECK(r.loss == 0.0);
  CHECK(r.grad_p.isZero(0.0));
  CHECK(r.grad_q.isZero(0.0));
  CHECK_THROWS_AS(contrastive_loss(p.leftCols(1), p.leftCols(1), 0.1, 1.4), ConfigError);
}

TEST_CASE("two-pair loss equals the hand expansion") {
  Eigen::MatrixXd p(2, 2), q(2, 2);
  p << 1, 0, 0, 1;
  const double a = 0.3;
  q << std::cos(a), std::sin(0.9), std::sin(a), std::cos(0.9);
  auto d = [&](int i, int j) { return (p.col(i) - q.col(j)).norm(); };
  double expect = 0.0;
  for (int i = 0; i < 2; ++i) {
    const int j = 1 - i;
    expect += std::max(d(i, i) - 0.1, 0.0) + std::max(1.4 - std::min(d(i, j), d(j, i)), 0.0);
  }
  CHECK(contrastive_loss(p, q, 0.1, 1.4).loss == doctest::Approx(expect / 2).epsilon(1e-14));
}

TEST_CASE("loss gradients match central differences") {
  const Eigen::MatrixXd p = unit_columns(6, 5, 2), q = unit_columns(6, 5, 3);
  const LossResult r = contrastive_loss(p, q, 0.1, 1.4);
  const double h = 1e-7;
  double worst = 0.0, scale = 0.0;
  for (int which = 0; which < 2; ++which)
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Eigen::MatrixXd a = which ? q : p, b = a;
      a.data()[i] += h;
      b.data()[i] -= h;
      const double fp = which ? contrastive_loss(p, a, 0.1, 1.4).loss : contrastive_loss(a, q, 0.1, 1.4).loss;
      const double fm = which ? contrastive_loss(p, b, 0.1, 1.4).loss : contrastive_loss(b, q, 0.1, 1.4).loss;
      const double fd = (fp - fm) / (2 * h);
      const double an = which ? r.grad_q.data()[i] : r.grad_p.data()[i];
      worst = std::max(worst, std::abs(fd - an));
      scale = std::max(scale, std::abs(fd));
    }
  CHECK(worst <= 1e-4 * scale);
}

TEST_CASE("loss ignores the order of pairs") {
  const Eigen::MatrixXd p = unit_columns(8, 6, 4), q = unit_columns(8, 6, 5);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 3, 0, 5, 1, 4, 2;
  const double a = contrastive_loss(p, q, 0.1, 1.4).loss;
  const double b = contrastive_loss(p * perm, q * perm, 0.1, 1.4).loss;
  CHECK(a == doctest::Approx(b).epsilon(1e-14));
  CHECK(a >= 0.0);
}

TEST_CASE("adam first step has magnitude lr") {
  Eigen::VectorXd w(3);
  w << 1.0, -2.0, 0.5;
  const Eigen::VectorXd w0 = w;
  Eigen::VectorXd g(3);
  g << 0.3, -4.0, 0.0;
  AdamState s;
  adam_step(w, g, s, 0.001);
  // m_hat = g and v_hat = g^2 after bias correction.
  CHECK(w(0) == doctest::Approx(w0(0) - 0.001 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
  CHECK(w(1) == doctest::Approx(w0(1) + 0.001 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
  CHECK(w(2) == w0(2));
  AdamState s1, s2;
  Eigen::VectorXd a = w0, b = w0;
  adam_step(a, g, s1, 0.01);
  adam_step(b, g, s2, 0.01);
  CHECK(a == b);
}

TEST_CASE("learning rate halves every five epochs") {
  TrainConfig c;
  CHECK(learning_rate(c, 1) == 0.001);
  CHECK(learning_rate(c, 4) == 0.001);
  CHECK(learning_rate(c, 5) == 0.0005);
  CHECK(learning_rate(c, 10) == 0.00025);
}

TEST_CASE("synthetic pairs without noise at full overlap pair up by index") {
  SynthOptions o;
  o.points_per_cloud = 800;
  o.overlap = 1.0;
  const SynthPair s = synth_pair(3, o);
  REQUIRE(s.correspondences.size() == 800);
  for (std::size_t i = 0; i < 800; ++i) {
    CHECK(s.correspondences[i].first == static_cast<Eigen::Index>(i));
    CHECK(s.correspondences[i].second == static_cast<Eigen::Index>(i));
  }
  const SynthPair again = synth_pair(3, o);
  CHECK(again.q.points == s.q.points);
}

TEST_CASE("synthetic correspondences match a brute-force scan") {
  SynthOptions o;
  o.points_per_cloud = 600;
  o.overlap = 0.6;
  o.noise_sigma = 0.02;
  const SynthPair s = synth_pair(4, o);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> expect;
  for (Eigen::Index i = 0; i < s.p.size(); ++i) {
    const Vec3 moved = s.t_gt(s.p.point(i));
    Eigen::Index best = -1;
    double best_d = 0.0;
    for (Eigen::Index j = 0; j < s.q.size(); ++j) {
      const double d = (s.q.point(j) - moved).norm();
      if (d <= o.tau1 && (best < 0 || d < best_d)) best = j, best_d = d;
    }
    if (best >= 0) expect.emplace_back(i, best);
  }
  CHECK(s.correspondences == expect);
  CHECK(!expect.empty());
}

TEST_CASE("training with zero learning rate leaves weights unchanged") {
  EncoderConfig enc;
  enc.voxel = VoxelParams{3, 4, 8, 0.45};
  SynthOptions o;
  o.points_per_cloud = 1500;
  const auto scenes = synth_pair_dataset(5, 1, o);
  const PatchPairSet set = build_patch_pairs(scenes, enc, 8, 0.1, 6, 1);
  REQUIRE(set.size() == 8);
  ArchConfig arch = default_arch(enc.voxel, false, {4, 4}, 8);
  const NetworkWeights w = init_weights(7, arch);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 1;
  tc.batch_size = 8;
  const TrainResult r = train(tc, w, set, set);
  CHECK(r.last.flatten() == w.flatten());
  REQUIRE(r.log.size() == 2);
  CHECK(r.log[1].mean_loss == r.log[0].mean_loss);

  tc.learning_rate = 0.01;
  tc.epochs = 2;
  const TrainResult a = train(tc, w, set, set), b = train(tc, w, set, set);
  CHECK(a.last.flatten() == b.last.flatten());
  CHECK(a.last.flatten() != w.flatten());
  CHECK(training_log_csv(a.log).rfind("epoch,lr,mean_loss,val_FMR,wall_seconds\n", 0) == 0);

  const auto path = temp_path("ckpt.snet");
  save_checkpoint(a.last, a.optimizer, path);
  const AdamState st = load_optimizer_state(path);
  CHECK(st.step == a.optimizer.step);
  CHECK(st.m == a.optimizer.m);
  CHECK(st.v == a.optimizer.v);
  CHECK_THROWS_AS(train(tc, w, PatchPairSet{}, set), ConfigError);
}
