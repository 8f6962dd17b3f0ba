#include "mvkp/bootstrap.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "mvkp/error.hpp"
#include "mvkp/supervise.hpp"

namespace mvkp {

AugmentResult augment_labels(std::span<const Annotation> labeled, std::span<const Camera> cameras,
                             const OccluderSet& occluders, const AugmentOptions& options) {
  require(labeled.size() == cameras.size(), ErrorCode::kShapeMismatch,
          "need one annotation per camera");
  require(!labeled.empty(), ErrorCode::kInsufficientViews, "no views to augment");
  const int channels = labeled.front().channel_count();
  for (const Annotation& a : labeled) {
    require(a.channel_count() == channels, ErrorCode::kShapeMismatch,
            "annotations differ in channel count");
  }

  AugmentResult result;
  result.annotations.assign(labeled.begin(), labeled.end());
  result.triangulated.assign(std::max(channels - 1, 0), false);
  result.points.assign(result.triangulated.size(), Eigen::Vector3d::Zero());

  for (int c = 0; c + 1 < channels; ++c) {
    std::vector<Observation> observations;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
      if (labeled[v].channels[c]) observations.push_back({cameras[v], labeled[v].channels[c]->pixel});
    }
    if (observations.size() < 2) continue;
    RansacResult fit;
    try {
      fit = triangulate_ransac(observations, options.ransac_threshold, options.ransac_iterations,
                               options.seed + static_cast<std::uint64_t>(c));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoConsensus && e.code() != ErrorCode::kDegenerateConfiguration &&
          e.code() != ErrorCode::kInsufficientViews) {
        throw;
      }
      continue;
    }
    result.triangulated[c] = true;
    result.points[c] = fit.point;

    for (std::size_t v = 0; v < cameras.size(); ++v) {
      if (result.annotations[v].channels[c]) continue;
      const Camera& camera = cameras[v];
      if (camera.to_camera(fit.point).z() <= 1e-9) continue;
      const Eigen::Vector2d x = project(camera, fit.point);
      if (x.x() < -0.5 || x.y() < -0.5 || x.x() > camera.image_width() - 0.5 ||
          x.y() > camera.image_height() - 0.5) {
        continue;
      }
      const bool visible = raycast_visibility(fit.point, camera, occluders) == 1;
      result.annotations[v].channels[c] = KeypointLabel{x, visible, Provenance::kAugmented};
    }
  }
  return result;
}

PredictorWeights pretrain(PredictorWeights weights, std::span<const LabeledImage> labeled,
                          const PretrainOptions& options) {
  require(!labeled.empty(), ErrorCode::kInvalidArgument, "pretraining needs labeled images");
  require(options.batch_size > 0 && options.epochs >= 0, ErrorCode::kInvalidArgument,
          "bad pretraining schedule");
  if (options.epochs == 0) return weights;

  OptimizerState optimizer = OptimizerState::for_weights(weights, options.learning_rate);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      Eigen::VectorXd grads = Eigen::VectorXd::Zero(weights.values().size());
      for (std::size_t k = start; k < end; ++k) {
        const LabeledImage& item = labeled[order[k]];
        const ForwardResult out = forward(weights, item.image);
        const LabelLossResult loss =
            label_loss(out.heatmap, out.visibility, item.annotation, options.sigma_gt);
        grads += backward(weights, out.cache, loss.grad_p, loss.grad_v);
      }
      grads /= static_cast<double>(end - start);
      step(optimizer, weights, grads);
    }
  }
  return weights;
}

}  // namespace mvkp
