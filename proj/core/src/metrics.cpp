#include "mvkp/metrics.hpp"

#include <cmath>
#include <limits>

#include "mvkp/error.hpp"
#include "mvkp/visibility.hpp"

namespace mvkp {
namespace {

struct Counts {
  long correct = 0;
  long total = 0;
};

double normalizer_length(const Annotation& truth, const PckOptions& options) {
  if (options.normalizer == Normalizer::kHead) {
    require(options.head_a >= 0 && options.head_b >= 0 &&
                options.head_a < truth.channel_count() && options.head_b < truth.channel_count(),
            ErrorCode::kInvalidArgument, "head channels out of range");
    const auto& a = truth.channels[options.head_a];
    const auto& b = truth.channels[options.head_b];
    if (!a || !b) return 0.0;
    return (a->pixel - b->pixel).norm();
  }
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  int n = 0;
  for (int c = 0; c + 1 < truth.channel_count(); ++c) {
    if (!truth.channels[c]) continue;
    lo = lo.cwiseMin(truth.channels[c]->pixel);
    hi = hi.cwiseMax(truth.channels[c]->pixel);
    ++n;
  }
  return n < 2 ? 0.0 : (hi - lo).norm();
}

}  // namespace

KeypointSet predicted_keypoints(const Heatmap& heatmap, const VisibilityMap& visibility) {
  const PosteriorResult xi = posterior(heatmap, visibility);
  KeypointSet out;
  for (int c = 0; c + 1 < heatmap.channels(); ++c) out.push_back(argmax_peak(xi.posterior, c));
  return out;
}

PckCurve pck_curve(std::span<const KeypointSet> predicted, std::span<const Annotation> truth,
                   std::span<const double> thresholds, const PckOptions& options) {
  require(predicted.size() == truth.size(), ErrorCode::kShapeMismatch,
          "predictions and ground truth differ in length");
  std::vector<Counts> counts(thresholds.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double length = normalizer_length(truth[i], options);
    if (!(length > 0.0)) continue;
    for (int c = 0; c + 1 < truth[i].channel_count(); ++c) {
      const auto& label = truth[i].channels[c];
      if (!label || !label->visible) continue;
      require(c < static_cast<int>(predicted[i].size()), ErrorCode::kShapeMismatch,
              "prediction lacks a labeled channel");
      const double error = (predicted[i][c] - label->pixel).norm();
      for (std::size_t k = 0; k < thresholds.size(); ++k) {
        ++counts[k].total;
        if (error < thresholds[k] * length) ++counts[k].correct;
      }
    }
  }
  PckCurve curve;
  curve.thresholds.assign(thresholds.begin(), thresholds.end());
  for (const Counts& c : counts) {
    if (c.total == 0) fail(ErrorCode::kEmptyEvaluationSet, "no visible keypoints to evaluate");
    curve.values.push_back(static_cast<double>(c.correct) / static_cast<double>(c.total));
  }
  return curve;
}

double pck(std::span<const KeypointSet> predicted, std::span<const Annotation> truth,
           double threshold, const PckOptions& options) {
  const double thresholds[1] = {threshold};
  return pck_curve(predicted, truth, thresholds, options).values[0];
}

std::vector<double> default_thresholds() {
  std::vector<double> out;
  for (int k = 0; k <= 50; ++k) out.push_back(0.01 * k);
  return out;
}

double auc(std::span<const double> thresholds, std::span<const double> values) {
  require(thresholds.size() == values.size() && thresholds.size() >= 2, ErrorCode::kBadCurve,
          "curve needs at least two samples");
  for (std::size_t k = 1; k < thresholds.size(); ++k) {
    require(thresholds[k] > thresholds[k - 1], ErrorCode::kBadCurve,
            "curve thresholds must ascend");
  }
  double area = 0.0;
  for (std::size_t k = 1; k < thresholds.size(); ++k) {
    area += 0.5 * (values[k] + values[k - 1]) * (thresholds[k] - thresholds[k - 1]);
  }
  return area / (thresholds.back() - thresholds.front());
}

double auc(const PckCurve& curve) { return auc(curve.thresholds, curve.values); }

KeypointError keypoint_error(std::span<const KeypointSet> predicted,
                             std::span<const Annotation> truth) {
  require(predicted.size() == truth.size(), ErrorCode::kShapeMismatch,
          "predictions and ground truth differ in length");
  KeypointError out;
  double squared = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int c = 0; c + 1 < truth[i].channel_count(); ++c) {
      const auto& label = truth[i].channels[c];
      if (!label || !label->visible) continue;
      require(c < static_cast<int>(predicted[i].size()), ErrorCode::kShapeMismatch,
              "prediction lacks a labeled channel");
      const double error = (predicted[i][c] - label->pixel).norm();
      out.mae += error;
      squared += error * error;
      ++out.count;
    }
  }
  if (out.count == 0) fail(ErrorCode::kEmptyEvaluationSet, "no visible keypoints to evaluate");
  out.mae /= static_cast<double>(out.count);
  out.rmse = std::sqrt(squared / static_cast<double>(out.count));
  return out;
}

}  // namespace mvkp
