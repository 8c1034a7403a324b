#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spherereg/encoder.hpp"
#include "spherereg/metrics.hpp"
#include "spherereg/registration.hpp"
#include "spherereg/synth.hpp"
#include "spherereg/training.hpp"

namespace spherereg {

/// Everything a command needs. Text form is "key = value" lines; `preset`
/// is applied first, then the remaining keys override it.
struct PipelineConfig {
  std::string preset = "3dmatch";
  EncoderConfig encoder;
  std::vector<int> channels{32, 64, 64, 128};
  int descriptor_dim = 32;
  PaddingMode padding = PaddingMode::Spherical;
  std::uint64_t weights_seed = 0;

  Eigen::Index keypoints = 5000;
  std::uint64_t seed = 0;
  MatchMode match = MatchMode::Mutual;
  RansacOptions ransac;
  Thresholds thresholds;

  TrainConfig train;
  SynthOptions synth;
  int train_scenes = 20;
  int val_scenes = 4;
  int pairs_per_scene = 100;
  double min_separation = 0.1;

  int threads = 0;  // 0: resolve from SPHEREREG_THREADS / hardware

  ArchConfig arch() const;
  void validate() const;
  std::string to_text() const;  // fully resolved, round-trips through parse
};

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
PipelineConfig make_preset(const std::string& name);

/// Applies "key = value" overrides to `config` (including `preset`, which
/// resets everything else first). Unknown keys throw ConfigError.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Hash of the serialized weights, as embedded in every report.
std::uint64_t weights_hash(const NetworkWeights& w);

/// Random keypoint subset (all points when the cloud is smaller).
Points select_keypoints(const PointCloud& cloud, Eigen::Index count, std::uint64_t seed);

DescriptorSet describe_cloud(const PipelineConfig& config, const PointCloud& cloud, const NetworkWeights& w);

struct RegistrationOutcome {
  CorrespondenceSet matches;
  RansacResult ransac;
};

RegistrationOutcome register_descriptors(const PipelineConfig& config, const DescriptorSet& p,
                                         const DescriptorSet& q);

/// Describe both clouds, match, RANSAC, and score against the ground truth.
PairEvaluation register_synth_pair(const PipelineConfig& config, const SynthPair& pair, const NetworkWeights& w,
                                   const std::string& pair_id, RegistrationOutcome* outcome = nullptr);

/// Synthetic patch pairs for training and validation plus the fit itself.
TrainResult train_on_synth(const PipelineConfig& config, const EpochCallback& on_epoch = {});

}  // namespace spherereg
