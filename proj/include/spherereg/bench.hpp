#pragma once

#include <string>
#include <vector>

#include "spherereg/pipeline.hpp"

namespace spherereg {

struct InvarianceReport {
  int patches = 0;
  int rotations = 0;
  int skipped = 0;              // degenerate frames replaced by other patches
  double max_rotation_error = 0.0;
  double max_shift_error = 0.0;  // descriptor change under azimuth shifts of the grid
  double seconds = 0.0;
};

/// Descriptor distance between a patch and its rotated copies, and under
/// circular azimuth shifts of the encoded grid.
InvarianceReport invariance_suite(const PipelineConfig& config, const NetworkWeights& w, int patches, int rotations,
                                  std::uint64_t seed);

struct NoiseRow {
  double sigma = 0.0;
  double fmr = 0.0;
  double ir = 0.0;
  double rr = 0.0;
};

/// Noise 1 sweep over synthetic pairs. The same scenes and noise seeds are
/// used for every sigma. RR is skipped (left 0) unless `with_registration`.
std::vector<NoiseRow> noise_suite(const PipelineConfig& config, const NetworkWeights& w,
                                  const std::vector<double>& sigmas, int pairs, std::uint64_t seed,
                                  bool with_registration);

/// CSV "noise_std,FMR,IR,RR".
std::string noise_table_csv(const std::vector<NoiseRow>& rows, const Thresholds& th);

struct RegistrationBench {
  std::vector<PairEvaluation> evals;
  MetricSummary summary;
  double seconds = 0.0;
};

RegistrationBench registration_suite(const PipelineConfig& config, const NetworkWeights& w, int pairs,
                                     std::uint64_t seed);

}  // namespace spherereg
