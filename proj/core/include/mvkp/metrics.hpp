#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mvkp/grid.hpp"
#include "mvkp/heatmap.hpp"

namespace mvkp {

enum class Normalizer { kBoundingBox, kHead };

struct PckOptions {
  Normalizer normalizer = Normalizer::kBoundingBox;
  // Ground-truth channels whose distance is the head length.
  int head_a = 0;
  int head_b = 1;
};

// One predicted location per keypoint channel.
using KeypointSet = std::vector<Eigen::Vector2d>;

// Argmax of the visibility-gated posterior for every keypoint channel.
KeypointSet predicted_keypoints(const Heatmap& heatmap, const VisibilityMap& visibility);

// Fraction of visible ground-truth keypoints predicted strictly closer than
// threshold * normalizer. The box normalizer is the diagonal of all labeled
// keypoints of the item; items whose normalizer is zero are skipped.
double pck(std::span<const KeypointSet> predicted, std::span<const Annotation> truth,
           double threshold, const PckOptions& options = {});

struct PckCurve {
  std::vector<double> thresholds;
  std::vector<double> values;
};

// Thresholds 0, 0.01, ..., 0.5.
std::vector<double> default_thresholds();

PckCurve pck_curve(std::span<const KeypointSet> predicted, std::span<const Annotation> truth,
                   std::span<const double> thresholds, const PckOptions& options = {});

// Trapezoidal area normalized by the threshold span.
double auc(std::span<const double> thresholds, std::span<const double> values);
double auc(const PckCurve& curve);

// Experimental. Distance from visible ground truth in grid cells, without a
// normalizer.
struct KeypointError {
  double mae = 0.0;
  double rmse = 0.0;
  long count = 0;
};

KeypointError keypoint_error(std::span<const KeypointSet> predicted,
                             std::span<const Annotation> truth);

}  // namespace mvkp
