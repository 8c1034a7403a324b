#include "spherereg/bench.hpp"

#include <chrono>
#include <cstdio>

#include <Eigen/Eigenvalues>

#include "spherereg/noise.hpp"
#include "spherereg/parallel.hpp"

namespace spherereg {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// True when every decision inside the LRF has a clear margin, so that
// rounding-level perturbations (such as a rotation) cannot flip an axis.
bool well_conditioned(const Patch& patch) {
  if (patch.size() < 10) return false;
  try {
    build_lrf(patch);
  } catch (const DegenerateError&) {
    return false;
  }
  const Mat3 m = weighted_covariance(patch);
  Eigen::SelfAdjointEigenSolver<Mat3> solver(m);
  const Vec3 ev = solver.eigenvalues();
  const double tr = m.trace();
  if (ev(1) - ev(0) < 1e-3 * tr || ev(2) - ev(1) < 1e-6 * tr) return false;
  const Vec3 z = solver.eigenvectors().col(0);
  const Points offsets = patch.neighbors.colwise() - patch.center;
  const Eigen::ArrayXd dots = (z.transpose() * offsets).transpose().array();
  const double tiny = 1e-9 * patch.radius;
  const Eigen::Index pos = (dots > tiny).count(), neg = (dots < -tiny).count();
  const Eigen::Index n = dots.size();
  // The majority must hold whichever way the near-zero dots fall.
  if (!(2 * pos > n || 2 * neg > n)) return false;
  const Eigen::VectorXd w = (patch.radius - offsets.colwise().norm().array()).matrix().transpose();
  const Vec3 c = offsets * (w / w.sum());
  return (c - z * z.dot(c)).norm() > 1e-4 * patch.radius;
}

}  // namespace

InvarianceReport invariance_suite(const PipelineConfig& config, const NetworkWeights& w, int patches, int rotations,
                                  std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  InvarianceReport rep;
  rep.rotations = rotations;
  const PointCloud scene = synth_scene(mix_seed(seed, 1), config.synth.points_per_cloud, config.synth.extent);
  const RadiusIndex index(scene.points, config.encoder.voxel.radius);
  const double radius = config.encoder.voxel.radius;
  Rng gen = make_rng(seed, 2);
  std::vector<Patch> chosen;
  for (int attempts = 0; static_cast<int>(chosen.size()) < patches && attempts < 100 * patches; ++attempts) {
    const auto i = static_cast<Eigen::Index>(uniform_index(gen, static_cast<std::uint64_t>(scene.size())));
    Patch p = radius_neighbors(index, scene.point(i), radius);
    if (well_conditioned(p))
      chosen.push_back(std::move(p));
    else
      ++rep.skipped;
  }
  rep.patches = static_cast<int>(chosen.size());
  std::vector<Mat3> rots;
  for (int r = 0; r < rotations; ++r) rots.push_back(random_rotation(gen));

  std::vector<double> rot_err(chosen.size(), 0.0), shift_err(chosen.size(), 0.0);
  const int K = config.encoder.voxel.azimuth_bins;
  parallel_for(chosen.size(), resolve_threads(config.threads), [&](std::size_t i) {
    const Patch& p = chosen[i];
    const Tensor4d grid = encode_patch(p, config.encoder).grid;
    const Descriptor base = forward(grid, w);
    for (const Mat3& r : rots) {
      Patch q = p;
      q.center = r * p.center;
      q.neighbors = r * p.neighbors;
      rot_err[i] = std::max(rot_err[i], (forward(encode_patch(q, config.encoder).grid, w) - base).norm());
    }
    for (int s = 1; s < K; ++s)
      shift_err[i] = std::max(shift_err[i], (forward(shift_azimuth(grid, s), w) - base).norm());
  });
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    rep.max_rotation_error = std::max(rep.max_rotation_error, rot_err[i]);
    rep.max_shift_error = std::max(rep.max_shift_error, shift_err[i]);
  }
  rep.seconds = seconds_since(start);
  return rep;
}

std::vector<NoiseRow> noise_suite(const PipelineConfig& config, const NetworkWeights& w,
                                  const std::vector<double>& sigmas, int pairs, std::uint64_t seed,
                                  bool with_registration) {
  SynthOptions clean = config.synth;
  clean.noise_sigma = 0.0;
  clean.tau1 = config.thresholds.inlier_distance;
  const auto base = synth_pair_dataset(mix_seed(seed, 400), pairs, clean);
  std::vector<NoiseRow> rows;
  for (double sigma : sigmas) {
    NoiseRow row;
    row.sigma = sigma;
    std::vector<double> irs, rmses;
    for (int i = 0; i < pairs; ++i) {
      SynthPair pair = base[static_cast<std::size_t>(i)];
      if (sigma > 0.0) {
        pair.p = gaussian_clipped(pair.p, sigma, sigma, mix_seed(pair.seed, 13));
        pair.q = gaussian_clipped(pair.q, sigma, sigma, mix_seed(pair.seed, 14));
      }
      PipelineConfig c = config;
      c.seed = mix_seed(config.seed, pair.seed);
      const DescriptorSet dp = describe_cloud(c, pair.p, w);
      c.seed = mix_seed(c.seed, 1);
      const DescriptorSet dq = describe_cloud(c, pair.q, w);
      const CorrespondenceSet matches = match_features(dp, dq, config.match);
      irs.push_back(inlier_ratio(matches, pair.t_gt, config.thresholds.inlier_distance));
      if (with_registration) {
        RansacOptions ro = config.ransac;
        ro.threads = resolve_threads(config.threads);
        const RansacResult r = ransac(matches, ro);
        const CorrespondenceSet gt =
            gt_correspondences(pair.p, pair.q, pair.t_gt, config.thresholds.inlier_distance);
        rmses.push_back(rmse(gt, r.transform));
      }
    }
    row.fmr = fmr(irs, config.thresholds.inlier_ratio);
    double sum = 0.0;
    for (double ir : irs) sum += ir;
    row.ir = sum / static_cast<double>(irs.size());
    if (with_registration) row.rr = registration_recall(rmses, config.thresholds.rmse);
    rows.push_back(row);
  }
  return rows;
}

std::string noise_table_csv(const std::vector<NoiseRow>& rows, const Thresholds& th) {
  std::string out = th.header_line() + "\nnoise_std,FMR,IR,RR\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.sigma, r.fmr, r.ir, r.rr);
    out += buf;
  }
  return out;
}

RegistrationBench registration_suite(const PipelineConfig& config, const NetworkWeights& w, int pairs,
                                     std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SynthOptions options = config.synth;
  options.tau1 = config.thresholds.inlier_distance;
  RegistrationBench bench;
  for (int i = 0; i < pairs; ++i) {
    const SynthPair pair = synth_pair(mix_seed(seed, 300 + static_cast<std::uint64_t>(i)), options);
    bench.evals.push_back(register_synth_pair(config, pair, w, "pair" + std::to_string(i)));
  }
  bench.summary = summarize(bench.evals, config.thresholds);
  bench.seconds = seconds_since(start);
  return bench;
}

}  // namespace spherereg
