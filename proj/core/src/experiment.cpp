#include "mvkp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "mvkp/epipolar_transfer.hpp"
#include "mvkp/error.hpp"
#include "mvkp/metrics.hpp"
#include "mvkp/visibility.hpp"

namespace mvkp {
namespace {

template <typename F>
auto run_stage(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    fail(e.code(), std::string("stage ") + stage + ": " + e.detail());
  } catch (const std::filesystem::filesystem_error& e) {
    fail(ErrorCode::kIo, std::string("stage ") + stage + ": " + e.what());
  }
}

std::mt19937_64 step_rng(std::uint64_t seed, int step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), 0x7e3au};
  return std::mt19937_64(seq);
}

int uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
}

// Transfer plans of every ordered view pair, built on first use.
class PlanCache {
 public:
  explicit PlanCache(const std::vector<Camera>& cameras) : cameras_(cameras) {}

  const ViewPartner& partner(int i, int j) {
    auto it = cache_.find({i, j});
    if (it != cache_.end()) return it->second;
    const EpipolarPencil pencil(cameras_[i], cameras_[j]);
    ViewPartner p;
    p.slot = -1;
    p.plan_reference = std::make_shared<const TransferPlan>(pencil, PencilView::kI);
    p.plan_partner = std::make_shared<const TransferPlan>(pencil, PencilView::kJ);
    return cache_.emplace(std::make_pair(i, j), std::move(p)).first->second;
  }

 private:
  const std::vector<Camera>& cameras_;
  std::map<std::pair<int, int>, ViewPartner> cache_;
};

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12f", value);
  return buf;
}

}  // namespace

std::vector<RowMask> ablation_rows() {
  return {
      {"supervised", false, false, false, false},
      {"temporal", false, true, false, false},
      {"temporal+visibility", false, true, true, false},
      {"cross", true, false, false, false},
      {"cross+visibility+bootstrap", true, false, true, true},
      {"temporal+cross", true, true, false, false},
      {"temporal+cross+bootstrap", true, true, false, true},
      {"full", true, true, true, true},
  };
}

std::vector<RowMask> ordering_rows() {
  return {
      {"supervised", false, false, false, true},
      {"temporal", false, true, false, true},
      {"cross", true, false, false, true},
      full_row(),
  };
}

RowMask full_row() { return {"full", true, true, true, true}; }

LossWeights masked_weights(const LossWeights& weights, const RowMask& row) {
  LossWeights out = weights;
  if (!row.cross) out.lambda_c = 0.0;
  if (!row.temporal) out.lambda_t = 0.0;
  if (!row.visibility) out.lambda_v = 0.0;
  return out;
}

std::vector<int> labeled_frames(int frames, double fraction) {
  require(frames >= 2, ErrorCode::kInvalidArgument, "need at least two frames");
  const int count =
      std::clamp(static_cast<int>(std::lround(fraction * frames)), 2, frames);
  std::vector<int> out;
  for (int k = 0; k < count; ++k) {
    out.push_back(static_cast<int>(std::lround(static_cast<double>(k) * (frames - 1) / (count - 1))));
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> labeled_views(int views, int count) {
  require(count >= 1 && count <= views, ErrorCode::kInvalidArgument, "bad labeled view count");
  std::vector<int> out;
  for (int k = 0; k < count; ++k) out.push_back(k * views / count);
  return out;
}

std::vector<int> unlabeled_frames(int frames, std::span<const int> labeled) {
  const std::set<int> skip(labeled.begin(), labeled.end());
  std::vector<int> out;
  for (int t = 0; t < frames; ++t) {
    if (!skip.count(t)) out.push_back(t);
  }
  return out;
}

LabelSet make_labels(const Dataset& dataset, const ExperimentConfig& config) {
  LabelSet labels;
  labels.frames = labeled_frames(dataset.frames, config.label.fraction);
  const std::vector<int> views = labeled_views(dataset.view_count(), config.label.views);
  for (int t : labels.frames) {
    std::vector<Annotation> human(dataset.view_count(), Annotation(dataset.channels));
    for (int v : views) {
      const Annotation& truth = dataset.truth[t][v];
      for (int c = 0; c + 1 < dataset.channels; ++c) {
        const auto& label = truth.channels[c];
        if (label && label->visible) {
          human[v].channels[c] = KeypointLabel{label->pixel, true, Provenance::kHuman};
        }
      }
      if (human[v].any_present()) labels.human[{t, v}] = human[v];
    }
    AugmentOptions augment = config.augment;
    augment.seed = config.seed * 7919u + static_cast<std::uint64_t>(t);
    const AugmentResult result =
        augment_labels(human, dataset.cameras, dataset.occluders[t], augment);
    for (int v = 0; v < dataset.view_count(); ++v) {
      if (result.annotations[v].any_present()) labels.augmented[{t, v}] = result.annotations[v];
    }
  }
  return labels;
}

std::vector<LabeledImage> labeled_images(const Dataset& dataset, const AnnotationTable& table) {
  std::vector<LabeledImage> out;
  for (const auto& [key, annotation] : table) {
    out.push_back({dataset.images[key.first][key.second], annotation});
  }
  return out;
}

PredictorWeights initialize(const Dataset& dataset, const LabelSet& labels,
                            const ExperimentConfig& config, bool use_bootstrap) {
  PredictorWeights weights = PredictorWeights::random(dataset.channels, config.seed);
  const std::vector<LabeledImage> items =
      labeled_images(dataset, use_bootstrap ? labels.augmented : labels.human);
  PretrainOptions options = config.pretrain;
  options.seed = config.seed;
  options.sigma_gt = config.loss.sigma_gt;
  return pretrain(std::move(weights), items, options);
}

RefineResult refine(const Dataset& dataset, const LabelSet& labels, PredictorWeights weights,
                    const ExperimentConfig& config, const RowMask& row,
                    const RefineOptions& options) {
  const TrainOptions& train = config.train;
  const LossWeights loss_weights = masked_weights(config.loss, row);
  const bool self_supervised =
      loss_weights.lambda_c > 0.0 || loss_weights.lambda_t > 0.0 || loss_weights.lambda_v > 0.0;

  OptimizerState optimizer = OptimizerState::for_weights(weights, train.learning_rate);
  if (options.resume) {
    Checkpoint ckpt = load_checkpoint(*options.resume);
    require(ckpt.optimizer.has_value(), ErrorCode::kFormat,
            "resume checkpoint carries no optimizer state");
    require(ckpt.weights.channels() == dataset.channels, ErrorCode::kShapeMismatch,
            "resume checkpoint has a different channel count");
    weights = std::move(ckpt.weights);
    optimizer = std::move(*ckpt.optimizer);
  }

  const std::vector<LabeledImage> labeled =
      labeled_images(dataset, row.bootstrap ? labels.augmented : labels.human);
  require(!labeled.empty(), ErrorCode::kInvalidArgument, "no labeled images to train on");
  const std::vector<int> unlabeled = unlabeled_frames(dataset.frames, labels.frames);
  const std::vector<CameraPair> pairs = adjacency(dataset.cameras, loss_weights.eps_c);
  std::vector<std::vector<int>> neighbors(dataset.view_count());
  for (const auto& [i, j] : pairs) {
    neighbors[i].push_back(j);
    neighbors[j].push_back(i);
  }
  PlanCache plans(dataset.cameras);
  const int gap = std::min(train.max_gap, dataset.flow_gap);

  RefineResult result{weights, {}};
  for (int s = static_cast<int>(optimizer.step); s < train.steps; ++s) {
    std::mt19937_64 rng = step_rng(config.seed, s);

    std::vector<const Image*> images;
    std::map<std::pair<int, int>, int> slot_of;
    auto slot = [&](const Image& image, int t, int v) {
      auto [it, inserted] = slot_of.try_emplace({t, v}, static_cast<int>(images.size()));
      if (inserted) images.push_back(&image);
      return it->second;
    };

    std::vector<Batch> batches;
    for (int k = 0; k < train.labeled_batch; ++k) {
      const int index = uniform_index(rng, labeled.size());
      Batch batch;
      batch.reference = static_cast<int>(images.size());
      images.push_back(&labeled[index].image);
      batch.annotation = labeled[index].annotation;
      batches.push_back(std::move(batch));
    }
    for (int k = 0; k < train.unlabeled_batch && !unlabeled.empty(); ++k) {
      const int v = uniform_index(rng, dataset.view_count());
      const int t = unlabeled[uniform_index(rng, unlabeled.size())];
      int delta = 1 + uniform_index(rng, gap);
      if (uniform_index(rng, 2) == 1) delta = -delta;
      if (t + delta < 0 || t + delta >= dataset.frames) delta = -delta;
      const int t2 = t + delta;
      const int j = neighbors[v].empty() ? -1 : neighbors[v][uniform_index(rng, neighbors[v].size())];
      if (!self_supervised) continue;

      Batch batch;
      batch.reference = slot(dataset.images[t][v], t, v);
      if (loss_weights.lambda_t > 0.0 && t2 >= 0 && t2 < dataset.frames) {
        const FlowField* flow = &dataset.flow(v, t, t2);
        FlowField noisy;
        if (train.flow_noise > 0.0) {
          noisy = *flow;
          std::normal_distribution<double> noise(0.0, train.flow_noise);
          for (double& value : noisy.values()) value += noise(rng);
          flow = &noisy;
        }
        auto partner = make_temporal_partner(0, *flow, loss_weights);
        if (partner) {
          partner->slot = slot(dataset.images[t2][v], t2, v);
          batch.temporal = std::move(partner);
        }
      }
      if (j >= 0 && (loss_weights.lambda_c > 0.0 || loss_weights.lambda_v > 0.0)) {
        const int partner_slot = slot(dataset.images[t][j], t, j);
        if (loss_weights.lambda_c > 0.0) {
          ViewPartner p = plans.partner(v, j);
          p.slot = partner_slot;
          batch.views.push_back(std::move(p));
        }
        if (loss_weights.lambda_v > 0.0) batch.visibility_partners.push_back(partner_slot);
      }
      batches.push_back(std::move(batch));
    }

    std::vector<Prediction> predictions;
    std::vector<ActivationCache> caches;
    predictions.reserve(images.size());
    caches.reserve(images.size());
    for (const Image* image : images) {
      ForwardResult out = forward(weights, *image);
      predictions.push_back({std::move(out.heatmap), std::move(out.visibility)});
      caches.push_back(std::move(out.cache));
    }
    const OverallLossResult loss =
        overall_loss(predictions, batches, loss_weights, config.temporal);
    Eigen::VectorXd grads = Eigen::VectorXd::Zero(weights.values().size());
    for (std::size_t k = 0; k < predictions.size(); ++k) {
      grads += backward(weights, caches[k], loss.grad_heatmap[k], loss.grad_visibility[k]);
    }
    if (!batches.empty()) grads /= static_cast<double>(batches.size());
    step(optimizer, weights, grads);
    result.losses.push_back({s, loss.values});

    if (options.checkpoint_dir && train.checkpoint_every > 0 &&
        (s + 1) % train.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%06d.ckpt", s + 1);
      save_checkpoint(*options.checkpoint_dir / name, weights, &optimizer);
    }
  }
  if (options.checkpoint_dir) save_checkpoint(*options.checkpoint_dir / "final.ckpt", weights, &optimizer);
  result.weights = std::move(weights);
  return result;
}

EvalResult evaluate(const PredictorWeights& weights, const Dataset& dataset,
                    std::span<const int> frames, const EvalOptions& options) {
  std::vector<KeypointSet> predicted;
  std::vector<Annotation> truth;
  for (int t : frames) {
    for (int v = 0; v < dataset.view_count(); ++v) {
      const ForwardResult out = forward(weights, dataset.images[t][v]);
      predicted.push_back(predicted_keypoints(out.heatmap, out.visibility));
      truth.push_back(dataset.truth[t][v]);
    }
  }
  EvalResult result;
  result.items = static_cast<int>(truth.size());
  const std::vector<double> thresholds = default_thresholds();
  result.auc = auc(pck_curve(predicted, truth, thresholds));
  result.pck = pck(predicted, truth, options.threshold);
  PckOptions head;
  head.normalizer = Normalizer::kHead;
  head.head_a = options.head_a;
  head.head_b = options.head_b;
  result.pckh = pck(predicted, truth, 0.5, head);
  const KeypointError error = keypoint_error(predicted, truth);
  result.mae = error.mae;
  result.rmse = error.rmse;
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "row,split,images,pck,auc,pckh,mae_cells,rmse_cells\n";
  const std::pair<const char*, const EvalResult*> rows[] = {{"held_out", &report.held_out},
                                                            {"unseen", &report.unseen}};
  for (const auto& [split, r] : rows) {
    out << report.row.name << ',' << split << ',' << r->items << ',' << format_double(r->pck)
        << ',' << format_double(r->auc) << ',' << format_double(r->pckh) << ','
        << format_double(r->mae) << ',' << format_double(r->rmse) << '\n';
  }
}

void write_losses_csv(const std::filesystem::path& path, std::span<const LossRow> losses) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "step,L_L,L_C,L_T,L_V,total\n";
  for (const LossRow& r : losses) {
    out << r.step << ',' << format_double(r.values.label) << ',' << format_double(r.values.cross)
        << ',' << format_double(r.values.temporal) << ',' << format_double(r.values.visibility)
        << ',' << format_double(r.values.total) << '\n';
  }
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  namespace fs = std::filesystem;
  run_stage("config", [&] {
    config.validate();
    fs::create_directories(options.out_dir / "checkpoints");
    save_config(options.out_dir / "config.ini", config);
  });

  const Dataset dataset = run_stage("ingest", [&] {
    if (options.scene_dir) {
      Dataset d = load_dataset(*options.scene_dir);
      require(d.channels == config.scene.channels, ErrorCode::kConfigInvalid,
              "scene channel count differs from the config");
      return d;
    }
    return dataset_from_scene(generate(config.scene, config.seed), config.train.max_gap);
  });
  const LabelSet labels = run_stage("label", [&] { return make_labels(dataset, config); });
  run_stage("label", [&] {
    write_annotations(options.out_dir / "labels_augmented.txt", labels.augmented);
  });

  PredictorWeights initial(dataset.channels);
  if (!options.resume) {
    initial = run_stage("bootstrap", [&] {
      PredictorWeights w = initialize(dataset, labels, config, options.row.bootstrap);
      save_checkpoint(options.out_dir / "checkpoints" / "bootstrap.ckpt", w);
      return w;
    });
  }

  ExperimentReport report;
  report.row = options.row;
  const RefineResult trained = run_stage("train", [&] {
    RefineOptions refine_options;
    refine_options.checkpoint_dir = options.out_dir / "checkpoints";
    refine_options.resume = options.resume;
    return refine(dataset, labels, initial, config, options.row, refine_options);
  });
  report.losses = trained.losses;

  run_stage("eval", [&] {
    const std::vector<int> held_out = unlabeled_frames(dataset.frames, labels.frames);
    report.held_out = evaluate(trained.weights, dataset, held_out, config.eval);
    const Dataset unseen = dataset_from_scene(
        generate(config.scene, config.seed + config.eval.unseen_seed_offset), 0);
    std::vector<int> all(unseen.frames);
    for (int t = 0; t < unseen.frames; ++t) all[t] = t;
    report.unseen = evaluate(trained.weights, unseen, all, config.eval);
  });

  run_stage("report", [&] {
    write_metrics_csv(options.out_dir / "metrics.csv", report);
    write_losses_csv(options.out_dir / "losses.csv", report.losses);
    std::ofstream summary(options.out_dir / "summary.txt");
    if (!summary) fail(ErrorCode::kIo, "cannot write summary.txt");
    summary << "row " << report.row.name << "\nseed " << config.seed << "\nlabeled_frames";
    for (int t : labels.frames) summary << ' ' << t;
    summary << "\nheld_out pck@" << config.eval.threshold << ' ' << format_double(report.held_out.pck)
            << " auc " << format_double(report.held_out.auc) << " pckh@0.5 "
            << format_double(report.held_out.pckh) << "\nunseen pck@" << config.eval.threshold
            << ' ' << format_double(report.unseen.pck) << " auc "
            << format_double(report.unseen.auc) << " pckh@0.5 "
            << format_double(report.unseen.pckh) << '\n';
  });
  return report;
}

std::vector<AblationEntry> run_ablation(const ExperimentConfig& config,
                                        std::span<const std::uint64_t> seeds,
                                        std::span<const RowMask> rows,
                                        const std::filesystem::path& out_dir) {
  run_stage("config", [&] {
    config.validate();
    std::filesystem::create_directories(out_dir);
    save_config(out_dir / "config.ini", config);
  });
  std::vector<AblationEntry> entries;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig cfg = config;
    cfg.seed = seed;
    const Dataset dataset = run_stage("ingest", [&] {
      return dataset_from_scene(generate(cfg.scene, seed), cfg.train.max_gap);
    });
    const Dataset unseen = run_stage("ingest", [&] {
      return dataset_from_scene(generate(cfg.scene, seed + cfg.eval.unseen_seed_offset), 0);
    });
    const LabelSet labels = run_stage("label", [&] { return make_labels(dataset, cfg); });
    std::map<bool, PredictorWeights> initial;
    const std::vector<int> held_out = unlabeled_frames(dataset.frames, labels.frames);
    std::vector<int> all(unseen.frames);
    for (int t = 0; t < unseen.frames; ++t) all[t] = t;

    for (const RowMask& row : rows) {
      if (!initial.count(row.bootstrap)) {
        initial.emplace(row.bootstrap, run_stage("bootstrap", [&] {
                          return initialize(dataset, labels, cfg, row.bootstrap);
                        }));
      }
      AblationEntry entry;
      entry.seed = seed;
      entry.report.row = row;
      const RefineResult trained = run_stage("train", [&] {
        return refine(dataset, labels, initial.at(row.bootstrap), cfg, row);
      });
      entry.report.losses = trained.losses;
      run_stage("eval", [&] {
        entry.report.held_out = evaluate(trained.weights, dataset, held_out, cfg.eval);
        entry.report.unseen = evaluate(trained.weights, unseen, all, cfg.eval);
      });
      entries.push_back(std::move(entry));
    }
  }

  run_stage("report", [&] {
    std::ofstream csv(out_dir / "ablation.csv");
    if (!csv) fail(ErrorCode::kIo, "cannot write ablation.csv");
    csv << "seed,row,pck,auc,pckh,unseen_pck,unseen_auc,unseen_pckh\n";
    for (const AblationEntry& e : entries) {
      const ExperimentReport& r = e.report;
      csv << e.seed << ',' << r.row.name << ',' << format_double(r.held_out.pck) << ','
          << format_double(r.held_out.auc) << ',' << format_double(r.held_out.pckh) << ','
          << format_double(r.unseen.pck) << ',' << format_double(r.unseen.auc) << ','
          << format_double(r.unseen.pckh) << '\n';
    }
    std::ofstream summary(out_dir / "summary.txt");
    if (!summary) fail(ErrorCode::kIo, "cannot write summary.txt");
    summary << "row mean_pck mean_auc mean_unseen_pck\n";
    for (const RowMask& row : rows) {
      double pck_sum = 0.0, auc_sum = 0.0, unseen_sum = 0.0;
      int n = 0;
      for (const AblationEntry& e : entries) {
        if (e.report.row.name != row.name) continue;
        pck_sum += e.report.held_out.pck;
        auc_sum += e.report.held_out.auc;
        unseen_sum += e.report.unseen.pck;
        ++n;
      }
      if (n == 0) continue;
      summary << row.name << ' ' << format_double(pck_sum / n) << ' ' << format_double(auc_sum / n)
              << ' ' << format_double(unseen_sum / n) << '\n';
    }
  });
  return entries;
}

}  // namespace mvkp
