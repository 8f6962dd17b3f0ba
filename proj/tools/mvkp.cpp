// Command-line harness: scene synthesis, bootstrapping, training, evaluation,
// epipolar transfer dumps and the ablation matrix.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvkp/epipolar_transfer.hpp"
#include "mvkp/error.hpp"
#include "mvkp/experiment.hpp"
#include "mvkp/supervise.hpp"
#include "mvkp/synth.hpp"

namespace fs = std::filesystem;
using namespace mvkp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string scene;
};

void add_common(CLI::App* cmd, Common& c, bool needs_scene) {
  cmd->add_option("--config", c.config, "INI config; built-in defaults when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "overrides experiment.seed");
  cmd->add_option("--out", c.out, "output directory");
  if (needs_scene) {
    cmd->add_option("--scene", c.scene, "scene directory written by `synth`; generated when omitted")
        ->check(CLI::ExistingDirectory);
  }
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig config = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  config.validate();
  return config;
}

Dataset ingest(const Common& c, const ExperimentConfig& config) {
  if (!c.scene.empty()) return load_dataset(c.scene);
  return dataset_from_scene(generate(config.scene, config.seed), config.train.max_gap);
}

RowMask find_row(const std::string& name) {
  for (const RowMask& row : ablation_rows()) {
    if (row.name == name) return row;
  }
  for (const RowMask& row : ordering_rows()) {
    if (row.name == name) return row;
  }
  fail(ErrorCode::kInvalidArgument, "unknown row '" + name + "'");
}

void print_eval(const char* split, const EvalResult& r) {
  std::printf("%-9s images %4d  pck %.4f  auc %.4f  pckh %.4f\n", split, r.items, r.pck, r.auc,
              r.pckh);
}

int cmd_synth(const Common& c) {
  const ExperimentConfig config = resolve(c);
  const Dataset dataset =
      dataset_from_scene(generate(config.scene, config.seed), config.train.max_gap);
  save_dataset(c.out, dataset);
  save_config(fs::path(c.out) / "config.ini", config);
  std::printf("scene: %d views, %d frames, %d channels -> %s\n", dataset.view_count(),
              dataset.frames, dataset.channels, c.out.c_str());
  return 0;
}

int cmd_bootstrap(const Common& c, bool human_only) {
  const ExperimentConfig config = resolve(c);
  const Dataset dataset = ingest(c, config);
  const LabelSet labels = make_labels(dataset, config);
  fs::create_directories(c.out);
  write_annotations(fs::path(c.out) / "labels_human.txt", labels.human);
  write_annotations(fs::path(c.out) / "labels_augmented.txt", labels.augmented);
  const PredictorWeights weights = initialize(dataset, labels, config, !human_only);
  save_checkpoint(fs::path(c.out) / "bootstrap.ckpt", weights);
  std::printf("labeled frames %zu, human images %zu, augmented images %zu\n",
              labels.frames.size(), labels.human.size(), labels.augmented.size());
  return 0;
}

int cmd_train(const Common& c, const std::string& row, const std::string& resume) {
  const ExperimentConfig config = resolve(c);
  RunOptions options;
  options.out_dir = c.out;
  if (!c.scene.empty()) options.scene_dir = c.scene;
  if (!resume.empty()) options.resume = resume;
  options.row = find_row(row);
  const ExperimentReport report = run_experiment(config, options);
  print_eval("held-out", report.held_out);
  print_eval("unseen", report.unseen);
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint) {
  const ExperimentConfig config = resolve(c);
  const Dataset dataset = ingest(c, config);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const std::vector<int> labeled = labeled_frames(dataset.frames, config.label.fraction);
  ExperimentReport report;
  report.row.name = fs::path(checkpoint).stem().string();
  report.held_out =
      evaluate(ckpt.weights, dataset, unlabeled_frames(dataset.frames, labeled), config.eval);
  const Dataset unseen =
      dataset_from_scene(generate(config.scene, config.seed + config.eval.unseen_seed_offset), 0);
  std::vector<int> all(unseen.frames);
  for (int t = 0; t < unseen.frames; ++t) all[t] = t;
  report.unseen = evaluate(ckpt.weights, unseen, all, config.eval);
  fs::create_directories(c.out);
  write_metrics_csv(fs::path(c.out) / "metrics.csv", report);
  print_eval("held-out", report.held_out);
  print_eval("unseen", report.unseen);
  return 0;
}

// Heatmaps of both views, and each view's distribution back-projected into the
// other, one dump per channel and direction.
int cmd_transfer_viz(const Common& c, int frame, std::vector<int> views,
                     const std::string& checkpoint) {
  const ExperimentConfig config = resolve(c);
  const Dataset dataset = ingest(c, config);
  require(frame >= 0 && frame < dataset.frames, ErrorCode::kInvalidArgument, "frame out of range");
  for (int v : views) {
    require(v >= 0 && v < dataset.view_count(), ErrorCode::kInvalidArgument, "view out of range");
  }
  std::optional<PredictorWeights> weights;
  if (!checkpoint.empty()) weights = load_checkpoint(checkpoint).weights;
  auto heatmap_of = [&](int v) {
    if (weights) return forward(*weights, dataset.images[frame][v]).heatmap;
    return label_heatmap(dataset.truth[frame][v], config.loss.sigma_gt,
                         dataset.cameras[v].image_width(), dataset.cameras[v].image_height());
  };
  const int i = views[0];
  const int j = views[1];
  const Heatmap p_i = heatmap_of(i);
  const Heatmap p_j = heatmap_of(j);
  const EpipolarPencil pencil(dataset.cameras[i], dataset.cameras[j]);
  const TransferPlan plan_i(pencil, PencilView::kI);
  const TransferPlan plan_j(pencil, PencilView::kJ);
  fs::create_directories(c.out);
  char name[64];
  std::snprintf(name, sizeof(name), "heatmap_v%02d.grid", i);
  write_grid(fs::path(c.out) / name, p_i);
  std::snprintf(name, sizeof(name), "heatmap_v%02d.grid", j);
  write_grid(fs::path(c.out) / name, p_j);
  for (int ch = 0; ch + 1 < p_i.channels(); ++ch) {
    const Heatmap into_j = backproject(transfer(p_i.plane_view(ch), plan_i), plan_j);
    const Heatmap into_i = backproject(transfer(p_j.plane_view(ch), plan_j), plan_i);
    std::snprintf(name, sizeof(name), "q_v%02d_to_v%02d_c%d.grid", i, j, ch);
    write_grid(fs::path(c.out) / name, into_j);
    std::snprintf(name, sizeof(name), "q_v%02d_to_v%02d_c%d.grid", j, i, ch);
    write_grid(fs::path(c.out) / name, into_i);
  }
  std::printf("wrote transfer dumps for frame %d, views %d and %d -> %s\n", frame, i, j,
              c.out.c_str());
  return 0;
}

int cmd_ablate(const Common& c, int seeds, const std::string& rows) {
  const ExperimentConfig config = resolve(c);
  std::vector<std::uint64_t> seed_list;
  for (int k = 0; k < seeds; ++k) seed_list.push_back(config.seed + static_cast<std::uint64_t>(k));
  const std::vector<RowMask> masks = rows == "ordering" ? ordering_rows() : ablation_rows();
  const std::vector<AblationEntry> entries = run_ablation(config, seed_list, masks, c.out);
  for (const AblationEntry& e : entries) {
    std::printf("seed %llu  %-28s pck %.4f  unseen %.4f\n", static_cast<unsigned long long>(e.seed),
                e.report.row.name.c_str(), e.report.held_out.pck, e.report.unseen.pck);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiview semi-supervised keypoint harness"};
  app.require_subcommand(1);

  Common common;
  auto* synth = app.add_subcommand("synth", "generate a scene directory");
  add_common(synth, common, false);

  bool human_only = false;
  auto* bootstrap = app.add_subcommand("bootstrap", "augment the sparse labels and pretrain");
  add_common(bootstrap, common, true);
  bootstrap->add_flag("--human-only", human_only, "pretrain on the human labels alone");

  std::string row = "full";
  std::string resume;
  auto* train = app.add_subcommand("train", "label, bootstrap, refine and evaluate one row");
  add_common(train, common, true);
  train->add_option("--row", row, "loss mask: full, supervised, temporal, cross, ...");
  train->add_option("--resume", resume, "checkpoint carrying optimizer state")
      ->check(CLI::ExistingFile);

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out and unseen frames");
  add_common(eval, common, true);
  eval->add_option("--checkpoint", checkpoint, "weights to evaluate")
      ->required()
      ->check(CLI::ExistingFile);

  int frame = 0;
  std::vector<int> views{0, 1};
  auto* viz = app.add_subcommand("transfer-viz", "dump epipolar back-projections for a view pair");
  add_common(viz, common, true);
  viz->add_option("--frame", frame, "frame index");
  viz->add_option("--views", views, "the two views")->expected(2);
  viz->add_option("--checkpoint", checkpoint, "predicted heatmaps instead of ground truth")
      ->check(CLI::ExistingFile);

  int seeds = 5;
  std::string rows = "ablation";
  auto* ablate = app.add_subcommand("ablate", "run the row mask matrix over several seeds");
  add_common(ablate, common, false);
  ablate->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
  ablate->add_option("--rows", rows, "ablation or ordering")
      ->check(CLI::IsMember({"ablation", "ordering"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(common);
    if (*bootstrap) return cmd_bootstrap(common, human_only);
    if (*train) return cmd_train(common, row, resume);
    if (*eval) return cmd_eval(common, checkpoint);
    if (*viz) return cmd_transfer_viz(common, frame, views, checkpoint);
    if (*ablate) return cmd_ablate(common, seeds, rows);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
