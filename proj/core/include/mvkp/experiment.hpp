#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvkp/bootstrap.hpp"
#include "mvkp/config.hpp"
#include "mvkp/dataset.hpp"
#include "mvkp/io.hpp"
#include "mvkp/model.hpp"
#include "mvkp/supervise.hpp"

namespace mvkp {

// Which self-supervision terms a training run uses, and whether its
// initialization is pretrained on augmented (bootstrapped) labels.
struct RowMask {
  std::string name;
  bool cross = false;
  bool temporal = false;
  bool visibility = false;
  bool bootstrap = false;
};

// The eight rows of the ablation table.
std::vector<RowMask> ablation_rows();
// Supervised-only, each single supervision and the full method, all
// sharing the bootstrapped initialization.
std::vector<RowMask> ordering_rows();
RowMask full_row();

LossWeights masked_weights(const LossWeights& weights, const RowMask& row);

// Evenly spaced frames including both sequence ends.
std::vector<int> labeled_frames(int frames, double fraction);
// Evenly spaced views around the rig.
std::vector<int> labeled_views(int views, int count);

struct LabelSet {
  std::vector<int> frames;
  AnnotationTable human;      // visible keypoints of the labeled views
  AnnotationTable augmented;  // human labels plus reprojections to every view
};

LabelSet make_labels(const Dataset& dataset, const ExperimentConfig& config);

std::vector<LabeledImage> labeled_images(const Dataset& dataset, const AnnotationTable& table);

// Seeded random weights pretrained on the augmented or on the human labels.
PredictorWeights initialize(const Dataset& dataset, const LabelSet& labels,
                            const ExperimentConfig& config, bool use_bootstrap);

struct LossRow {
  int step = 0;
  LossBreakdown values;
};

struct RefineOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
  std::optional<std::filesystem::path> resume;
};

struct RefineResult {
  PredictorWeights weights;
  std::vector<LossRow> losses;
};

// Semi-supervised refinement: every step mixes labeled images with unlabeled
// references, their temporal partner and an adjacent view.
RefineResult refine(const Dataset& dataset, const LabelSet& labels, PredictorWeights weights,
                    const ExperimentConfig& config, const RowMask& row,
                    const RefineOptions& options = {});

struct EvalResult {
  double pck = 0.0;   // at the configured threshold, box normalizer
  double auc = 0.0;   // over thresholds 0..0.5
  double pckh = 0.0;  // at half the head length
  double mae = 0.0;   // experimental, grid cells
  double rmse = 0.0;  // experimental, grid cells
  int items = 0;
};

EvalResult evaluate(const PredictorWeights& weights, const Dataset& dataset,
                    std::span<const int> frames, const EvalOptions& options);

std::vector<int> unlabeled_frames(int frames, std::span<const int> labeled);

struct ExperimentReport {
  RowMask row;
  EvalResult held_out;
  EvalResult unseen;
  std::vector<LossRow> losses;
};

struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> scene_dir;
  std::optional<std::filesystem::path> resume;
  RowMask row = full_row();
};

// ingest -> label -> bootstrap -> train -> eval. Writes metrics.csv,
// losses.csv, summary.txt, config.ini and checkpoints into out_dir. Errors are
// rethrown with the failing stage in the message.
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options);

struct AblationEntry {
  std::uint64_t seed = 0;
  ExperimentReport report;
};

// Every row for every seed; writes ablation.csv and summary.txt.
std::vector<AblationEntry> run_ablation(const ExperimentConfig& config,
                                        std::span<const std::uint64_t> seeds,
                                        std::span<const RowMask> rows,
                                        const std::filesystem::path& out_dir);

void write_metrics_csv(const std::filesystem::path& path, const ExperimentReport& report);
void write_losses_csv(const std::filesystem::path& path, std::span<const LossRow> losses);

}  // namespace mvkp
