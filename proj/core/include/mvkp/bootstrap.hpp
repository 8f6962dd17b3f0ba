#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mvkp/geometry.hpp"
#include "mvkp/heatmap.hpp"
#include "mvkp/model.hpp"
#include "mvkp/visibility.hpp"

namespace mvkp {

struct AugmentOptions {
  double ransac_threshold = 2.0;  // grid cells
  int ransac_iterations = 500;
  std::uint64_t seed = 0;
};

struct AugmentResult {
  std::vector<Annotation> annotations;  // one per camera
  std::vector<bool> triangulated;       // per keypoint channel
  std::vector<Eigen::Vector3d> points;  // valid where triangulated
};

// Triangulates every keypoint channel labeled in at least two views, then
// projects it into all cameras with ray-cast visibility. Existing labels are
// kept as they are; channels without consensus stay absent.
AugmentResult augment_labels(std::span<const Annotation> labeled, std::span<const Camera> cameras,
                             const OccluderSet& occluders, const AugmentOptions& options = {});

struct LabeledImage {
  Image image;
  Annotation annotation;
};

struct PretrainOptions {
  int epochs = 60;
  int batch_size = 4;
  double learning_rate = 3e-3;
  double sigma_gt = 1.0;
  std::uint64_t seed = 0;
};

// Label-loss-only Adam training over the labeled set.
PredictorWeights pretrain(PredictorWeights weights, std::span<const LabeledImage> labeled,
                          const PretrainOptions& options);

}  // namespace mvkp
