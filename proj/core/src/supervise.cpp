#include "mvkp/supervise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvkp/error.hpp"
#include "mvkp/visibility.hpp"

namespace mvkp {
namespace {

void add_to(std::span<double> target, std::span<const double> values, double scale) {
  for (std::size_t k = 0; k < target.size(); ++k) target[k] += scale * values[k];
}

const Prediction& slot_at(std::span<const Prediction> predictions, int slot) {
  require(slot >= 0 && slot < static_cast<int>(predictions.size()), ErrorCode::kInvalidArgument,
          "batch refers to a missing prediction slot");
  return predictions[slot];
}

}  // namespace

void LossWeights::validate() const {
  require(lambda_c >= 0.0 && lambda_t >= 0.0 && lambda_v >= 0.0, ErrorCode::kConfigInvalid,
          "loss weights must be non-negative");
  require(eps_m >= 0.0 && eps_m < eps_M, ErrorCode::kConfigInvalid,
          "flow gate needs 0 <= eps_m < eps_M");
  require(eps_c > 0.0, ErrorCode::kConfigInvalid, "adjacency radius must be positive");
  require(sigma_gt > 0.0, ErrorCode::kConfigInvalid, "label sigma must be positive");
}

Heatmap label_heatmap(const Annotation& annotation, double sigma, int width, int height) {
  require(sigma > 0.0, ErrorCode::kInvalidArgument, "label sigma must be positive");
  const int channels = annotation.channel_count();
  require(channels >= 2, ErrorCode::kShapeMismatch,
          "annotation needs a keypoint and a background channel");
  Heatmap out(width, height, channels);
  Plane peak(width, height, 0.0);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int c = 0; c + 1 < channels; ++c) {
    const auto& label = annotation.channels[c];
    if (!label) continue;
    out.set_plane(c, render_gaussian(label->pixel, sigma, width, height).plane(0));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const Eigen::Vector2d d = Eigen::Vector2d(x, y) - label->pixel;
        peak.at(x, y) = std::max(peak.at(x, y), std::exp(-d.squaredNorm() * inv));
      }
    }
  }
  if (annotation.any_present()) {
    std::span<double> background = out.plane(channels - 1);
    for (std::size_t k = 0; k < background.size(); ++k) background[k] = 1.0 - peak.values[k];
    if (normalize_in_place(background) <= 0.0) {
      std::fill(background.begin(), background.end(), 1.0 / static_cast<double>(background.size()));
    }
  }
  return out;
}

std::vector<std::optional<double>> label_visibility(const Annotation& annotation) {
  std::vector<std::optional<double>> labels(annotation.channels.size());
  for (std::size_t c = 0; c + 1 < labels.size(); ++c) {
    if (annotation.channels[c]) {
      labels[c] = annotation.channels[c]->visible ? kVisibleLabel : kOccludedLabel;
    }
  }
  if (!labels.empty() && annotation.any_present()) labels.back() = kVisibleLabel;
  return labels;
}

LabelLossResult label_loss(const Heatmap& p, const VisibilityMap& v, const Annotation& annotation,
                           double sigma_gt) {
  require(p.shape() == v.shape(), ErrorCode::kShapeMismatch,
          "heatmap and visibility map differ in shape");
  require(annotation.channel_count() == p.channels(), ErrorCode::kShapeMismatch,
          "annotation and heatmap differ in channel count");
  for (const auto& label : annotation.channels) {
    if (!label) continue;
    const Eigen::Vector2d& x = label->pixel;
    require(std::isfinite(x.x()) && std::isfinite(x.y()) && x.x() >= -0.5 && x.y() >= -0.5 &&
                x.x() <= p.width() - 0.5 && x.y() <= p.height() - 0.5,
            ErrorCode::kOutOfBoundsAnnotation, "annotation lies outside the grid");
  }

  LabelLossResult result{0.0, 0.0, 0.0, GradientGrid(p.shape()), GradientGrid(p.shape())};
  if (!annotation.any_present()) return result;

  const Heatmap target = label_heatmap(annotation, sigma_gt, p.width(), p.height());
  const int channels = p.channels();
  for (int c = 0; c < channels; ++c) {
    if (c + 1 < channels && !annotation.channels[c]) continue;
    const KlResult kl = kl_divergence(target.plane(c), p.plane(c));
    result.keypoint += kl.value;
    add_to(result.grad_p.plane(c), kl.grad_q, 1.0);
  }

  const auto labels = label_visibility(annotation);
  for (int c = 0; c < channels; ++c) {
    if (!labels[c]) continue;
    const double y = *labels[c];
    const std::span<const double> vc = v.plane(c);
    const auto it = std::max_element(vc.begin(), vc.end());
    const double m = *it;
    const double eps = kKlEpsilon;
    result.visibility += y * std::log((y + eps) / (m + eps)) +
                         (1.0 - y) * std::log((1.0 - y + eps) / (1.0 - m + eps));
    result.grad_v.plane(c)[static_cast<std::size_t>(it - vc.begin())] +=
        -y / (m + eps) + (1.0 - y) / (1.0 - m + eps);
  }
  result.value = result.keypoint + result.visibility;
  return result;
}

std::optional<TemporalPartner> make_temporal_partner(int slot, const FlowField& flow,
                                                     const LossWeights& weights) {
  if (!gate(flow, weights.eps_m, weights.eps_M)) return std::nullopt;
  return TemporalPartner{slot, std::make_shared<const BilinearWarp>(flow)};
}

OverallLossResult overall_loss(std::span<const Prediction> predictions,
                               std::span<const Batch> batches, const LossWeights& weights,
                               const TemporalOptions& temporal_options) {
  weights.validate();
  OverallLossResult result;
  result.grad_heatmap.reserve(predictions.size());
  result.grad_visibility.reserve(predictions.size());
  for (const Prediction& pred : predictions) {
    require(pred.heatmap.shape() == pred.visibility.shape(), ErrorCode::kShapeMismatch,
            "prediction heatmap and visibility differ in shape");
    result.grad_heatmap.emplace_back(pred.heatmap.shape());
    result.grad_visibility.emplace_back(pred.visibility.shape());
  }

  LossBreakdown& values = result.values;
  for (std::size_t index = 0; index < batches.size(); ++index) {
    const Batch& batch = batches[index];
    try {
      const Prediction& ref = slot_at(predictions, batch.reference);
      const int channels = ref.heatmap.channels();
      GradientGrid& ref_grad_p = result.grad_heatmap[batch.reference];
      GradientGrid& ref_grad_v = result.grad_visibility[batch.reference];

      if (batch.annotation) {
        const LabelLossResult label =
            label_loss(ref.heatmap, ref.visibility, *batch.annotation, weights.sigma_gt);
        values.label += label.value;
        add_to(ref_grad_p.values(), label.grad_p.values(), 1.0);
        add_to(ref_grad_v.values(), label.grad_v.values(), 1.0);
      }

      if (batch.temporal && weights.lambda_t > 0.0) {
        const Prediction& partner = slot_at(predictions, batch.temporal->slot);
        require(partner.heatmap.shape() == ref.heatmap.shape(), ErrorCode::kShapeMismatch,
                "temporal partner differs in shape");
        GradientGrid& partner_grad = result.grad_heatmap[batch.temporal->slot];
        for (int c = 0; c + 1 < channels; ++c) {
          const TemporalResult t =
              temporal_loss(ref.heatmap.plane_view(c), partner.heatmap.plane_view(c),
                            batch.temporal->warp, temporal_options);
          values.temporal += t.value;
          add_to(ref_grad_p.plane(c), t.grad_t1, weights.lambda_t);
          add_to(partner_grad.plane(c), t.grad_t2, weights.lambda_t);
        }
      }

      if (weights.lambda_c > 0.0) {
        for (const ViewPartner& view : batch.views) {
          const Prediction& partner = slot_at(predictions, view.slot);
          require(partner.heatmap.channels() == channels, ErrorCode::kShapeMismatch,
                  "view partner differs in channel count");
          GradientGrid& partner_grad = result.grad_heatmap[view.slot];
          for (int c = 0; c + 1 < channels; ++c) {
            const CrossViewResult x =
                cross_view_loss(ref.heatmap.plane_view(c), partner.heatmap.plane_view(c),
                                *view.plan_reference, *view.plan_partner);
            values.cross += x.value;
            add_to(ref_grad_p.plane(c), x.grad_i, weights.lambda_c);
            add_to(partner_grad.plane(c), x.grad_j, weights.lambda_c);
          }
        }
      }

      if (weights.lambda_v > 0.0) {
        const CameraPair pair{0, 1};
        for (int slot : batch.visibility_partners) {
          const Prediction& partner = slot_at(predictions, slot);
          require(partner.visibility.shape() == ref.visibility.shape(),
                  ErrorCode::kShapeMismatch, "visibility partner differs in shape");
          GradientGrid& partner_grad = result.grad_visibility[slot];
          for (int c = 0; c < channels; ++c) {
            const ConstPlane planes[2] = {ref.visibility.plane_view(c),
                                          partner.visibility.plane_view(c)};
            const VisibilityLossResult vis =
                visibility_loss(planes, std::span<const CameraPair>(&pair, 1));
            values.visibility += vis.value;
            add_to(ref_grad_v.plane(c), vis.grads[0], weights.lambda_v);
            add_to(partner_grad.plane(c), vis.grads[1], weights.lambda_v);
          }
        }
      }
    } catch (const Error& e) {
      fail(e.code(), "batch " + std::to_string(index) + ": " + e.detail());
    }
  }
  values.total = values.label + weights.lambda_c * values.cross +
                 weights.lambda_t * values.temporal + weights.lambda_v * values.visibility;
  return result;
}

}  // namespace mvkp
