#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spherereg/encoder.hpp"
#include "spherereg/scnn.hpp"
#include "spherereg/synth.hpp"

namespace spherereg {

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_p;  // dim x B
  Eigen::MatrixXd grad_q;
};

/// Hardest-in-batch contrastive margin loss over B corresponding descriptor
/// pairs (columns). For pair i the positive term uses d(P_i, Q_i); the
/// negative term uses the smallest d(P_i, Q_j) or d(P_j, Q_i), j != i.
/// Ties go to the first candidate (P_i row before Q_i column, lower j).
LossResult contrastive_loss(const Eigen::MatrixXd& desc_p, const Eigen::MatrixXd& desc_q, double margin_pos,
                            double margin_neg);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update in place.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, double lr,
               const AdamOptions& options = {});

struct TrainConfig {
  double learning_rate = 0.001;
  int decay_every = 5;
  double decay_factor = 0.5;
  int batch_size = 64;
  int epochs = 30;
  double margin_pos = 0.1;
  double margin_neg = 1.4;
  double tau2 = 0.05;  // validation FMR cutoff
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// Learning rate of training epoch `epoch` (1-based); halves at every
/// multiple of decay_every.
double learning_rate(const TrainConfig& config, int epoch);

/// Encoded patch pairs that correspond under a known transform. `group`
/// identifies the source scene; validation matches only within a group.
struct PatchPairSet {
  std::vector<Tensor4d> source;
  std::vector<Tensor4d> target;
  std::vector<int> group;

  std::size_t size() const { return source.size(); }
};

/// Up to `per_scene` pairs per scene around ground-truth correspondences,
/// with centers at least `min_separation` apart within a scene.
PatchPairSet build_patch_pairs(const std::vector<SynthPair>& scenes, const EncoderConfig& encoder, int per_scene,
                               double min_separation, std::uint64_t seed, int threads);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double val_fmr = 0.0;
  double val_ir = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  NetworkWeights best;       // highest validation FMR, then mean IR
  NetworkWeights last;
  AdamState optimizer;
  int best_epoch = 0;
  std::vector<EpochLog> log;  // row 0 is the untrained network
};

/// Validation score: per group, IR = fraction of sources whose nearest
/// target descriptor is their own pair; FMR over groups with IR > tau2.
std::pair<double, double> validation_fmr(const PatchPairSet& set, const NetworkWeights& weights, double tau2,
                                         int threads);

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(const TrainConfig& config, const NetworkWeights& initial, const PatchPairSet& train_set,
                  const PatchPairSet& validation, const EpochCallback& on_epoch = {});

/// CSV "epoch,lr,mean_loss,val_FMR,wall_seconds".
std::string training_log_csv(const std::vector<EpochLog>& log);

/// Weights file plus "<path>.opt" holding the Adam moments.
void save_checkpoint(const NetworkWeights& w, const AdamState& state, const std::filesystem::path& path);
AdamState load_optimizer_state(const std::filesystem::path& path);

}  // namespace spherereg
