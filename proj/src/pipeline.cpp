#include "spherereg/pipeline.hpp"

#include <cstdio>
#include <sstream>

#include "spherereg/io.hpp"
#include "spherereg/parallel.hpp"

namespace spherereg {

namespace {

PipelineConfig table_row(const std::string& name, double radius, bool msf) {
  PipelineConfig c;
  c.preset = name;
  c.encoder.voxel = VoxelParams{15, 20, 40, radius};
  c.encoder.msf = msf;
  return c;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool parse_bool(const std::string& v) {
  if (v == "yes" || v == "true" || v == "1" || v == "on") return true;
  if (v == "no" || v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("expected yes/no, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stoi(trim(item)));
  return out;
}

}  // namespace

std::vector<std::string> preset_names() { return {"3dmatch", "kitti", "3dmatch-to-eth", "3dmatch-to-kitti", "desk"}; }

PipelineConfig make_preset(const std::string& name) {
  if (name == "3dmatch") return table_row(name, 0.3, false);
  if (name == "kitti") return table_row(name, 2.0, false);
  if (name == "3dmatch-to-eth") return table_row(name, 1.2, true);
  if (name == "3dmatch-to-kitti") return table_row(name, 3.0, true);
  if (name == "desk") {
    // Single-core budget: a coarser grid and a narrow network on synthetic
    // 3-unit scenes.
    PipelineConfig c;
    c.preset = name;
    c.encoder.voxel = VoxelParams{6, 8, 16, 0.45};
    c.channels = {8, 16, 16, 32};
    c.descriptor_dim = 32;
    c.keypoints = 1000;
    c.train_scenes = 20;
    c.val_scenes = 4;
    c.pairs_per_scene = 100;
    c.min_separation = 0.1;
    c.synth.points_per_cloud = 5000;
    c.synth.overlap = 0.7;
    c.synth.noise_sigma = 0.01;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

ArchConfig PipelineConfig::arch() const {
  ArchConfig a = default_arch(encoder.voxel, encoder.msf, channels, descriptor_dim);
  a.padding = padding;
  return a;
}

void PipelineConfig::validate() const {
  encoder.voxel.validate();
  if (encoder.msf && encoder.voxel.radial_bins % 3 != 0) throw ConfigError("msf needs radial_bins divisible by 3");
  if (channels.empty()) throw ConfigError("at least one conv layer is required");
  if (descriptor_dim < 1) throw ConfigError("descriptor_dim must be positive");
  if (keypoints < 1) throw ConfigError("keypoints must be positive");
  if (ransac.iterations < 1) throw ConfigError("ransac_iterations must be positive");
  if (!(ransac.inlier_threshold > 0)) throw ConfigError("ransac_threshold must be positive");
  thresholds.validate();
  train.validate();
  arch();
}

void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "preset") {
      const int threads = c.threads;
      c = make_preset(value);
      c.threads = threads;
    } else if (key == "radial_bins") c.encoder.voxel.radial_bins = std::stoi(value);
    else if (key == "elevation_bins") c.encoder.voxel.elevation_bins = std::stoi(value);
    else if (key == "azimuth_bins") c.encoder.voxel.azimuth_bins = std::stoi(value);
    else if (key == "radius") c.encoder.voxel.radius = std::stod(value);
    else if (key == "msf") c.encoder.msf = parse_bool(value);
    else if (key == "voxelization") c.encoder.mode = parse_voxel_mode(value);
    else if (key == "wrap_azimuth") c.encoder.interp.wrap_azimuth = parse_bool(value);
    else if (key == "normalize_input") c.encoder.normalize_input = parse_bool(value);
    else if (key == "padding") c.padding = parse_padding_mode(value);
    else if (key == "channels") c.channels = parse_int_list(value);
    else if (key == "descriptor_dim") c.descriptor_dim = std::stoi(value);
    else if (key == "weights_seed") c.weights_seed = std::stoull(value);
    else if (key == "keypoints") c.keypoints = std::stoll(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "match") c.match = parse_match_mode(value);
    else if (key == "ransac_iterations") c.ransac.iterations = std::stoll(value);
    else if (key == "ransac_threshold") c.ransac.inlier_threshold = std::stod(value);
    else if (key == "ransac_seed") c.ransac.seed = std::stoull(value);
    else if (key == "ransac_early_exit") c.ransac.early_exit = parse_bool(value);
    else if (key == "ransac_confidence") c.ransac.confidence = std::stod(value);
    else if (key == "tau1") c.thresholds.inlier_distance = std::stod(value);
    else if (key == "tau2") c.thresholds.inlier_ratio = std::stod(value);
    else if (key == "tau3") c.thresholds.rmse = std::stod(value);
    else if (key == "sr_rte") c.thresholds.sr_rte = std::stod(value);
    else if (key == "sr_rre_deg") c.thresholds.sr_rre = std::stod(value) * kDegree;
    else if (key == "learning_rate") c.train.learning_rate = std::stod(value);
    else if (key == "decay_every") c.train.decay_every = std::stoi(value);
    else if (key == "decay_factor") c.train.decay_factor = std::stod(value);
    else if (key == "batch_size") c.train.batch_size = std::stoi(value);
    else if (key == "epochs") c.train.epochs = std::stoi(value);
    else if (key == "margin_pos") c.train.margin_pos = std::stod(value);
    else if (key == "margin_neg") c.train.margin_neg = std::stod(value);
    else if (key == "train_seed") c.train.seed = std::stoull(value);
    else if (key == "train_scenes") c.train_scenes = std::stoi(value);
    else if (key == "val_scenes") c.val_scenes = std::stoi(value);
    else if (key == "pairs_per_scene") c.pairs_per_scene = std::stoi(value);
    else if (key == "min_separation") c.min_separation = std::stod(value);
    else if (key == "synth_points") c.synth.points_per_cloud = std::stoll(value);
    else if (key == "synth_overlap") c.synth.overlap = std::stod(value);
    else if (key == "synth_noise") c.synth.noise_sigma = std::stod(value);
    else if (key == "synth_extent") c.synth.extent = std::stod(value);
    else if (key == "threads") c.threads = std::stoi(value);
    else
      throw ConfigError("unknown config key '" + key + "'");
  } catch (const std::logic_error&) {
    throw ConfigError("bad value '" + value + "' for config key '" + key + "'");
  }
}

PipelineConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> items;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + " is not key = value");
    items.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  PipelineConfig c;
  for (const auto& [k, v] : items)
    if (k == "preset") apply_setting(c, k, v);
  for (const auto& [k, v] : items)
    if (k != "preset") apply_setting(c, k, v);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string PipelineConfig::to_text() const {
  std::string channel_list;
  for (std::size_t i = 0; i < channels.size(); ++i) channel_list += (i ? "," : "") + std::to_string(channels[i]);
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"preset", preset},
      {"radial_bins", std::to_string(encoder.voxel.radial_bins)},
      {"elevation_bins", std::to_string(encoder.voxel.elevation_bins)},
      {"azimuth_bins", std::to_string(encoder.voxel.azimuth_bins)},
      {"radius", fmt(encoder.voxel.radius)},
      {"msf", encoder.msf ? "yes" : "no"},
      {"voxelization", to_string(encoder.mode)},
      {"wrap_azimuth", encoder.interp.wrap_azimuth ? "yes" : "no"},
      {"normalize_input", encoder.normalize_input ? "yes" : "no"},
      {"padding", to_string(padding)},
      {"channels", channel_list},
      {"descriptor_dim", std::to_string(descriptor_dim)},
      {"weights_seed", std::to_string(weights_seed)},
      {"keypoints", std::to_string(keypoints)},
      {"seed", std::to_string(seed)},
      {"match", to_string(match)},
      {"ransac_iterations", std::to_string(ransac.iterations)},
      {"ransac_threshold", fmt(ransac.inlier_threshold)},
      {"ransac_seed", std::to_string(ransac.seed)},
      {"ransac_early_exit", ransac.early_exit ? "yes" : "no"},
      {"ransac_confidence", fmt(ransac.confidence)},
      {"tau1", fmt(thresholds.inlier_distance)},
      {"tau2", fmt(thresholds.inlier_ratio)},
      {"tau3", fmt(thresholds.rmse)},
      {"sr_rte", fmt(thresholds.sr_rte)},
      {"sr_rre_deg", fmt(thresholds.sr_rre / kDegree)},
      {"learning_rate", fmt(train.learning_rate)},
      {"decay_every", std::to_string(train.decay_every)},
      {"decay_factor", fmt(train.decay_factor)},
      {"batch_size", std::to_string(train.batch_size)},
      {"epochs", std::to_string(train.epochs)},
      {"margin_pos", fmt(train.margin_pos)},
      {"margin_neg", fmt(train.margin_neg)},
      {"train_seed", std::to_string(train.seed)},
      {"train_scenes", std::to_string(train_scenes)},
      {"val_scenes", std::to_string(val_scenes)},
      {"pairs_per_scene", std::to_string(pairs_per_scene)},
      {"min_separation", fmt(min_separation)},
      {"synth_points", std::to_string(synth.points_per_cloud)},
      {"synth_overlap", fmt(synth.overlap)},
      {"synth_noise", fmt(synth.noise_sigma)},
      {"synth_extent", fmt(synth.extent)},
  };
  std::string out;
  for (const auto& [k, v] : rows) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t weights_hash(const NetworkWeights& w) { return fnv1a64(serialize_weights(w)); }

Points select_keypoints(const PointCloud& cloud, Eigen::Index count, std::uint64_t seed) {
  if (cloud.size() <= count) return cloud.points;
  return select(cloud, random_downsample_indices(cloud.size(), count, seed)).points;
}

DescriptorSet describe_cloud(const PipelineConfig& config, const PointCloud& cloud, const NetworkWeights& w) {
  if (cloud.empty()) throw ConfigError("cannot describe an empty cloud");
  DescriptorSet set = describe_keypoints(cloud, select_keypoints(cloud, config.keypoints, config.seed), config.encoder,
                                         w, resolve_threads(config.threads));
  set.weights_hash = weights_hash(w);
  return set;
}

RegistrationOutcome register_descriptors(const PipelineConfig& config, const DescriptorSet& p,
                                         const DescriptorSet& q) {
  RegistrationOutcome out;
  out.matches = match_features(p, q, config.match);
  RansacOptions options = config.ransac;
  options.threads = resolve_threads(config.threads);
  out.ransac = ransac(out.matches, options);
  return out;
}

PairEvaluation register_synth_pair(const PipelineConfig& config, const SynthPair& pair, const NetworkWeights& w,
                                   const std::string& pair_id, RegistrationOutcome* outcome) {
  PipelineConfig c = config;
  c.seed = mix_seed(config.seed, pair.seed);
  const DescriptorSet dp = describe_cloud(c, pair.p, w);
  c.seed = mix_seed(c.seed, 1);
  const DescriptorSet dq = describe_cloud(c, pair.q, w);
  RegistrationOutcome reg = register_descriptors(config, dp, dq);
  const CorrespondenceSet gt = gt_correspondences(pair.p, pair.q, pair.t_gt, config.thresholds.inlier_distance);
  PairEvaluation e = evaluate_pair(pair_id, reg.matches, gt, reg.ransac.transform, pair.t_gt, config.thresholds);
  if (outcome) *outcome = std::move(reg);
  return e;
}

TrainResult train_on_synth(const PipelineConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const int threads = resolve_threads(config.threads);
  SynthOptions synth = config.synth;
  synth.tau1 = config.thresholds.inlier_distance;
  const std::uint64_t seed = config.train.seed;
  const auto train_scenes = synth_pair_dataset(mix_seed(seed, 100), config.train_scenes, synth);
  const auto val_scenes = synth_pair_dataset(mix_seed(seed, 200), config.val_scenes, synth);
  const PatchPairSet train_set =
      build_patch_pairs(train_scenes, config.encoder, config.pairs_per_scene, config.min_separation, mix_seed(seed, 101), threads);
  const PatchPairSet val_set =
      build_patch_pairs(val_scenes, config.encoder, config.pairs_per_scene, config.min_separation, mix_seed(seed, 201), threads);
  TrainConfig tc = config.train;
  tc.threads = threads;
  tc.tau2 = config.thresholds.inlier_ratio;
  return train(tc, init_weights(config.weights_seed, config.arch()), train_set, val_set, on_epoch);
}

}  // namespace spherereg
