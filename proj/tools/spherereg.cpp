// Command-line front end: describe, register, evaluate, noise, train, bench,
// synth. Exit codes: 0 success, 1 pipeline failure, 2 usage or I/O error.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spherereg/bench.hpp"
#include "spherereg/io.hpp"
#include "spherereg/noise.hpp"
#include "spherereg/parallel.hpp"
#include "spherereg/pipeline.hpp"
#include "spherereg/svg.hpp"

namespace fs = std::filesystem;
using namespace spherereg;
using json = nlohmann::ordered_json;

namespace {

struct Global {
  std::string config_path;
  std::string preset;
  std::vector<std::string> settings;
  int threads = 0;
};

PipelineConfig resolve_config(const Global& g) {
  PipelineConfig c;
  if (!g.config_path.empty()) c = load_config(g.config_path);
  if (!g.preset.empty()) apply_setting(c, "preset", g.preset);
  for (const std::string& kv : g.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.threads > 0) c.threads = g.threads;
  c.threads = resolve_threads(c.threads);
  c.validate();
  return c;
}

json config_json(const PipelineConfig& c) {
  // threads never change results, so the embedded config leaves them out.
  return c.to_text();
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

NetworkWeights weights_or_fresh(const PipelineConfig& c, const std::string& path) {
  NetworkWeights w = path.empty() ? init_weights(c.weights_seed, c.arch()) : load_weights(path);
  if (w.arch.input_tensor_shape() != c.encoder.grid_shape())
    throw ConfigError("weights expect input " + shape_string(w.arch.input_tensor_shape()) + " but the config produces " +
                      shape_string(c.encoder.grid_shape()));
  return w;
}

std::vector<std::string> pair_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical-voxel descriptors and RANSAC registration for point clouds"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config_path, "key = value config file");
  app.add_option("--preset", g.preset, "3dmatch, kitti, 3dmatch-to-eth, 3dmatch-to-kitti or desk");
  app.add_option("--set", g.settings, "override a config key (key=value), repeatable");
  app.add_option("--threads", g.threads, "worker threads (default: SPHEREREG_THREADS or all cores)");

  std::string cloud, weights, out, source, target, report, corr_out, results, gt, spec, suite, log, plot;
  Eigen::Index keypoints = 0;
  int pairs = 0;

  auto* describe = app.add_subcommand("describe", "keypoint descriptors for a cloud");
  describe->add_option("--cloud", cloud, "input .ply or .xyz")->required();
  describe->add_option("--weights", weights, "network weights (fresh initialization if omitted)");
  describe->add_option("--keypoints", keypoints, "keypoint count (overrides config)");
  describe->add_option("--out", out, "descriptor file")->required();

  auto* reg = app.add_subcommand("register", "estimate the transform between two descriptor files");
  reg->add_option("--source", source, "descriptors of P")->required();
  reg->add_option("--target", target, "descriptors of Q")->required();
  reg->add_option("--out", out, "4x4 transform mapping P onto Q")->required();
  reg->add_option("--report", report, "JSON report");
  reg->add_option("--correspondences", corr_out, "CSV dump of the matches");

  auto* evaluate = app.add_subcommand("evaluate", "metrics for estimated transforms");
  evaluate->add_option("--results", results, "dir with <pair>/transform.txt [+ correspondences.csv]")->required();
  evaluate->add_option("--gt", gt, "dir with <pair>/p.ply, q.ply, gt.txt")->required();
  evaluate->add_option("--out", out, "output dir for metrics.csv and summary.json")->required();

  auto* noise = app.add_subcommand("noise", "corrupt a cloud");
  noise->add_option("--cloud", cloud, "input cloud")->required();
  noise->add_option("--spec", spec, "e.g. kind=gaussian_clipped,sigma=0.05,clip=0.05,seed=7")->required();
  noise->add_option("--out", out, "output cloud")->required();

  auto* trn = app.add_subcommand("train", "train on synthetic scene pairs");
  trn->add_option("--out", out, "weights file (best validation epoch)")->required();
  trn->add_option("--log", log, "training log CSV");
  trn->add_option("--plot", plot, "SVG plot of the loss curve");

  auto* bench = app.add_subcommand("bench", "invariance, noise-robustness or synthetic-registration suite");
  bench->add_option("--suite", suite, "invariance | noise-robustness | synthetic-registration")->required();
  bench->add_option("--weights", weights, "network weights (fresh initialization if omitted)");
  bench->add_option("--pairs", pairs, "pair / patch count");
  bench->add_option("--out", out, "output dir")->required();

  auto* synth = app.add_subcommand("synth", "write synthetic pairs in the evaluate layout");
  synth->add_option("--pairs", pairs, "number of pairs")->required();
  synth->add_option("--out", out, "output dir")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineConfig c = resolve_config(g);

    if (*describe) {
      if (keypoints > 0) c.keypoints = keypoints;
      const NetworkWeights w = weights_or_fresh(c, weights);
      save_descriptors(describe_cloud(c, load_point_cloud(cloud), w), out);
    } else if (*reg) {
      const DescriptorSet p = load_descriptors(source), q = load_descriptors(target);
      if (p.weights_hash != q.weights_hash) throw ConfigError("descriptor files come from different weights");
      const RegistrationOutcome r = register_descriptors(c, p, q);
      save_transform(r.ransac.transform, out);
      if (!corr_out.empty()) save_correspondences(r.matches, corr_out);
      if (!report.empty()) {
        json j;
        j["thresholds_header"] = c.thresholds.header_line();
        j["config"] = config_json(c);
        j["weights_hash"] = hex64(p.weights_hash);
        j["matches"] = r.matches.size();
        j["inliers"] = r.ransac.inlier_count;
        j["iterations"] = r.ransac.iterations;
        j["best_iteration"] = r.ransac.best_iteration;
        j["seed"] = r.ransac.seed;
        j["transform"] = format_transform(r.ransac.transform);
        write_json(report, j);
      }
    } else if (*evaluate) {
      std::vector<PairEvaluation> evals;
      for (const std::string& id : pair_ids(gt)) {
        const fs::path gdir = fs::path(gt) / id, rdir = fs::path(results) / id;
        const PointCloud p = load_point_cloud(gdir / "p.ply"), q = load_point_cloud(gdir / "q.ply");
        const RigidTransformd t_gt = load_transform(gdir / "gt.txt");
        const RigidTransformd t_est = load_transform(rdir / "transform.txt");
        CorrespondenceSet predicted;
        if (fs::exists(rdir / "correspondences.csv")) predicted = load_correspondences(rdir / "correspondences.csv");
        const CorrespondenceSet gt_corr = gt_correspondences(p, q, t_gt, c.thresholds.inlier_distance);
        evals.push_back(evaluate_pair(id, predicted, gt_corr, t_est, t_gt, c.thresholds));
      }
      fs::create_directories(out);
      write_file(fs::path(out) / "metrics.csv", report_csv(evals, c.thresholds));
      json j = json::parse(summary_json(summarize(evals, c.thresholds), c.thresholds));
      j["config"] = config_json(c);
      write_json(fs::path(out) / "summary.json", j);
    } else if (*noise) {
      const NoiseSpec s = parse_noise_spec(spec);
      const PointCloud in = load_point_cloud(cloud);
      const CloudFormat format = fs::path(out).extension() == ".xyz" ? CloudFormat::XyzText : CloudFormat::PlyBinaryLE;
      save_point_cloud(apply_noise(in, s), out, format);
      if (s.kind == NoiseKind::RangeNoise) std::cerr << "note: range_noise approximates depth-map noise\n";
    } else if (*trn) {
      const TrainResult r = train_on_synth(c, [](const EpochLog& row) {
        std::fprintf(stderr, "epoch %d lr %.6g loss %.6f val_FMR %.4f (%.1fs)\n", row.epoch, row.lr, row.mean_loss,
                     row.val_fmr, row.wall_seconds);
      });
      save_checkpoint(r.best, r.optimizer, out);
      if (!log.empty()) write_file(log, training_log_csv(r.log));
      if (!plot.empty()) {
        Series s{"mean loss", {}, {}};
        for (const auto& row : r.log) {
          s.x.push_back(row.epoch);
          s.y.push_back(row.mean_loss);
        }
        write_file(plot, line_chart_svg("Training loss", "epoch", "hardest-in-batch loss", {s}));
      }
      json j;
      j["config"] = config_json(c);
      j["weights_hash"] = hex64(weights_hash(r.best));
      j["best_epoch"] = r.best_epoch;
      std::filesystem::path rp = out;
      rp += ".json";
      write_json(rp, j);
    } else if (*bench) {
      const NetworkWeights w = weights_or_fresh(c, weights);
      fs::create_directories(out);
      json j;
      j["suite"] = suite;
      j["config"] = config_json(c);
      j["weights_hash"] = hex64(weights_hash(w));
      if (suite == "invariance") {
        const InvarianceReport r = invariance_suite(c, w, pairs > 0 ? pairs : 100, 10, c.seed);
        j["patches"] = r.patches;
        j["rotations"] = r.rotations;
        j["max_rotation_error"] = r.max_rotation_error;
        j["max_shift_error"] = r.max_shift_error;
        j["seconds"] = r.seconds;
      } else if (suite == "noise-robustness") {
        const std::vector<double> sigmas{0.0, 0.01, 0.03, 0.05, 0.07};
        const auto rows = noise_suite(c, w, sigmas, pairs > 0 ? pairs : 10, c.seed, true);
        write_file(fs::path(out) / "noise.csv", noise_table_csv(rows, c.thresholds));
        Series fmr_s{"FMR", {}, {}}, ir_s{"IR", {}, {}}, rr_s{"RR", {}, {}};
        for (const auto& r : rows) {
          fmr_s.x.push_back(r.sigma), fmr_s.y.push_back(r.fmr);
          ir_s.x.push_back(r.sigma), ir_s.y.push_back(r.ir);
          rr_s.x.push_back(r.sigma), rr_s.y.push_back(r.rr);
        }
        write_file(fs::path(out) / "noise.svg", line_chart_svg("Noise 1 sweep", "noise std", "ratio", {fmr_s, ir_s, rr_s}));
      } else if (suite == "synthetic-registration") {
        const RegistrationBench b = registration_suite(c, w, pairs > 0 ? pairs : 20, c.seed);
        write_file(fs::path(out) / "metrics.csv", report_csv(b.evals, c.thresholds));
        j["summary"] = json::parse(summary_json(b.summary, c.thresholds));
        j["seconds"] = b.seconds;
      } else {
        std::cerr << "error: unknown suite '" << suite << "'\n";
        return 2;
      }
      write_json(fs::path(out) / "report.json", j);
    } else if (*synth) {
      SynthOptions options = c.synth;
      options.tau1 = c.thresholds.inlier_distance;
      const auto set = synth_pair_dataset(c.seed, pairs, options);
      for (std::size_t i = 0; i < set.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "pair%03zu", i);
        const fs::path dir = fs::path(out) / id;
        fs::create_directories(dir);
        save_point_cloud(set[i].p, dir / "p.ply", CloudFormat::PlyBinaryLE);
        save_point_cloud(set[i].q, dir / "q.ply", CloudFormat::PlyBinaryLE);
        save_transform(set[i].t_gt, dir / "gt.txt");
      }
    }
  } catch (const DegenerateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
