#include "spherereg/registration.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "spherereg/parallel.hpp"
#include "spherereg/rng.hpp"

namespace spherereg {

void CorrespondenceSet::push_back(const Vec3& s, const Vec3& t, double dist, Eigen::Index si, Eigen::Index ti) {
  const Eigen::Index n = size();
  source.conservativeResize(3, n + 1);
  target.conservativeResize(3, n + 1);
  feature_distance.conservativeResize(n + 1);
  source.col(n) = s;
  target.col(n) = t;
  feature_distance(n) = dist;
  source_index.push_back(si);
  target_index.push_back(ti);
}

MatchMode parse_match_mode(const std::string& name) {
  if (name == "nn") return MatchMode::Nearest;
  if (name == "mutual") return MatchMode::Mutual;
  throw ConfigError("unknown match mode '" + name + "'");
}

std::string to_string(MatchMode mode) { return mode == MatchMode::Nearest ? "nn" : "mutual"; }

namespace {

// For each column of `from`, the nearest column of `to` and its squared distance.
void nearest_columns(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, std::vector<Eigen::Index>& idx,
                     std::vector<double>& d2) {
  idx.assign(static_cast<std::size_t>(from.cols()), -1);
  d2.assign(static_cast<std::size_t>(from.cols()), std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    for (Eigen::Index j = 0; j < to.cols(); ++j) {
      const double d = (from.col(i) - to.col(j)).squaredNorm();
      if (d < d2[static_cast<std::size_t>(i)]) {
        d2[static_cast<std::size_t>(i)] = d;
        idx[static_cast<std::size_t>(i)] = j;
      }
    }
  }
}

}  // namespace

CorrespondenceSet match_features(const DescriptorSet& source, const DescriptorSet& target, MatchMode mode) {
  if (source.size() == 0 || target.size() == 0) throw ConfigError("match_features: empty descriptor set");
  if (source.dim() != target.dim()) throw ConfigError("match_features: descriptor dimensions differ");
  std::vector<Eigen::Index> st, ts;
  std::vector<double> st_d2, ts_d2;
  nearest_columns(source.descriptors, target.descriptors, st, st_d2);
  if (mode == MatchMode::Mutual) nearest_columns(target.descriptors, source.descriptors, ts, ts_d2);
  CorrespondenceSet out;
  for (Eigen::Index i = 0; i < source.size(); ++i) {
    const Eigen::Index j = st[static_cast<std::size_t>(i)];
    if (mode == MatchMode::Mutual && ts[static_cast<std::size_t>(j)] != i) continue;
    out.push_back(source.keypoints.col(i), target.keypoints.col(j), std::sqrt(st_d2[static_cast<std::size_t>(i)]), i, j);
  }
  return out;
}

RigidTransformd kabsch(const Eigen::Ref<const Points>& src, const Eigen::Ref<const Points>& dst) {
  if (src.cols() != dst.cols()) throw ConfigError("kabsch: point count mismatch");
  if (src.cols() < 3) throw DegenerateError("kabsch needs at least 3 correspondences");
  const Vec3 cs = src.rowwise().mean();
  const Vec3 cd = dst.rowwise().mean();
  const Points s = src.colwise() - cs;
  const Points d = dst.colwise() - cd;

  const Eigen::Vector3d spread = Eigen::JacobiSVD<Mat3>(s * s.transpose()).singularValues();
  if (!(spread(0) > 0.0) || spread(1) <= 1e-12 * spread(0))
    throw DegenerateError("kabsch: source points are collinear or coincident");

  const Mat3 h = s * d.transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = svd.matrixV() * fix * svd.matrixU().transpose();
  return {r, cd - r * cs};
}

std::array<Eigen::Index, 3> ransac_sample(std::uint64_t seed, std::int64_t iteration, Eigen::Index count) {
  SplitMix64 gen(mix_seed(seed, static_cast<std::uint64_t>(iteration)));
  const auto n = static_cast<std::uint64_t>(count);
  std::array<Eigen::Index, 3> s{};
  s[0] = static_cast<Eigen::Index>(uniform_index(gen, n));
  do {
    s[1] = static_cast<Eigen::Index>(uniform_index(gen, n));
  } while (s[1] == s[0]);
  do {
    s[2] = static_cast<Eigen::Index>(uniform_index(gen, n));
  } while (s[2] == s[0] || s[2] == s[1]);
  return s;
}

namespace {

struct Hypothesis {
  Eigen::Index count = -1;
  std::int64_t iteration = -1;
  RigidTransformd transform;
};

Eigen::Index count_inliers(const CorrespondenceSet& corr, const RigidTransformd& t, double thr2) {
  const Points moved = (t.rotation * corr.source).colwise() + t.translation;
  return ((moved - corr.target).colwise().squaredNorm().array() <= thr2).count();
}

}  // namespace

RansacResult ransac(const CorrespondenceSet& corr, const RansacOptions& options) {
  const Eigen::Index n = corr.size();
  if (n < 3) throw DegenerateError("ransac needs at least 3 correspondences, got " + std::to_string(n));
  if (options.iterations < 1) throw ConfigError("ransac needs a positive iteration budget");
  const double thr2 = options.inlier_threshold * options.inlier_threshold;

  // Iterations are processed in fixed blocks; within a round, blocks are
  // spread over workers and merged in block order, so the result does not
  // depend on the worker count.
  constexpr std::int64_t kBlock = 512;
  const int threads = std::max(1, options.threads);
  const std::int64_t round = kBlock * threads;

  Hypothesis best;
  std::int64_t done = 0;
  std::int64_t budget = options.iterations;
  while (done < budget) {
    const std::int64_t round_end = std::min(budget, done + round);
    const std::size_t blocks = static_cast<std::size_t>((round_end - done + kBlock - 1) / kBlock);
    std::vector<Hypothesis> block_best(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
      const std::int64_t begin = done + static_cast<std::int64_t>(b) * kBlock;
      const std::int64_t end = std::min(round_end, begin + kBlock);
      Hypothesis local;
      Points s(3, 3), d(3, 3);
      for (std::int64_t it = begin; it < end; ++it) {
        const auto idx = ransac_sample(options.seed, it, n);
        for (int k = 0; k < 3; ++k) {
          s.col(k) = corr.source.col(idx[static_cast<std::size_t>(k)]);
          d.col(k) = corr.target.col(idx[static_cast<std::size_t>(k)]);
        }
        RigidTransformd t;
        try {
          t = kabsch(s, d);
        } catch (const DegenerateError&) {
          continue;
        }
        const Eigen::Index c = count_inliers(corr, t, thr2);
        if (c > local.count) local = {c, it, t};
      }
      block_best[b] = local;
    });
    for (const Hypothesis& h : block_best)
      if (h.count > best.count) best = h;
    done = round_end;

    if (options.early_exit && best.count > 0) {
      const double w = static_cast<double>(best.count) / static_cast<double>(n);
      const double p_good = w * w * w;
      if (p_good >= 1.0) break;
      const double needed = std::log(1.0 - options.confidence) / std::log(1.0 - p_good);
      if (static_cast<double>(done) >= needed) break;
    }
  }
  if (best.count < 0) throw DegenerateError("ransac: every sampled hypothesis was degenerate");

  RansacResult result;
  result.seed = options.seed;
  result.iterations = done;
  result.best_iteration = best.iteration;
  const Points moved = (best.transform.rotation * corr.source).colwise() + best.transform.translation;
  const Eigen::VectorXd r2 = (moved - corr.target).colwise().squaredNorm().transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r2(i) <= thr2) result.inliers.push_back(i);
  result.inlier_count = static_cast<Eigen::Index>(result.inliers.size());
  result.transform = best.transform;
  if (result.inlier_count >= 3) {
    Points s(3, result.inlier_count), d(3, result.inlier_count);
    for (Eigen::Index k = 0; k < result.inlier_count; ++k) {
      s.col(k) = corr.source.col(result.inliers[static_cast<std::size_t>(k)]);
      d.col(k) = corr.target.col(result.inliers[static_cast<std::size_t>(k)]);
    }
    try {
      result.transform = kabsch(s, d);
    } catch (const DegenerateError&) {
    }
  }
  return result;
}

void save_correspondences(const CorrespondenceSet& corr, const std::filesystem::path& path) {
  std::string out = "src_x,src_y,src_z,dst_x,dst_y,dst_z,feat_dist\n";
  char buf[256];
  for (Eigen::Index i = 0; i < corr.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", corr.source(0, i),
                  corr.source(1, i), corr.source(2, i), corr.target(0, i), corr.target(1, i), corr.target(2, i),
                  corr.feature_distance(i));
    out += buf;
  }
  write_file(path, out);
}

CorrespondenceSet load_correspondences(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("src_x", 0) != 0) throw ParseError("correspondence CSV lacks its header", 0);
  CorrespondenceSet corr;
  std::size_t offset = line.size() + 1;
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    double v[7];
    std::istringstream ls(line);
    char comma;
    for (int k = 0; k < 7; ++k) {
      if (k > 0 && !(ls >> comma && comma == ',')) throw ParseError("malformed correspondence row", offset);
      if (!(ls >> v[k])) throw ParseError("malformed correspondence row", offset);
    }
    corr.push_back(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]), v[6], row, row);
    ++row;
    offset += line.size() + 1;
  }
  return corr;
}

}  // namespace spherereg
