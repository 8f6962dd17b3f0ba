#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mvkp/bootstrap.hpp"
#include "mvkp/metrics.hpp"
#include "mvkp/supervise.hpp"
#include "mvkp/synth.hpp"
#include "mvkp/temporal.hpp"

namespace mvkp {

struct LabelOptions {
  double fraction = 0.04;  // of frames; both sequence ends are always labeled
  int views = 3;           // human-labeled views per labeled frame
};

struct TrainOptions {
  int steps = 600;
  double learning_rate = 1e-3;
  int labeled_batch = 2;
  int unlabeled_batch = 2;
  int max_gap = 2;  // temporal partner offset, frames
  double flow_noise = 0.0;
  int checkpoint_every = 200;
};

struct EvalOptions {
  double threshold = 0.2;
  int head_a = 0;
  int head_b = 1;
  std::uint64_t unseen_seed_offset = 1000003;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  SynthConfig scene;
  LossWeights loss;
  TemporalOptions temporal;
  LabelOptions label;
  AugmentOptions augment;
  PretrainOptions pretrain;
  TrainOptions train;
  EvalOptions eval;

  // Throws kConfigInvalid.
  void validate() const;
};

// INI-style `key = value` file with sections. Keys that are absent keep their
// defaults; unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

}  // namespace mvkp
